//! Link scenarios: presets and a flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! name = scenario2
//! n_paths = 10
//! t_m = 0.6
//! profile = uniform        # or exponential
//! kappa = 0
//! beta = 0.22
//! ts = 1
//! frame_len = 100
//! oversample = 64
//! guard = 16
//! detector = method1       # or method2
//! sync_rule = max_h        # or earliest_path
//! seed = 1
//! ```
//!
//! Keys may appear in any order; missing keys take the values shown for
//! [`LinkScenario::default`]. Unknown keys are an error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::{pds, MultipathProfile, ProfileKind, SyncRule, Synchronizer, DEFAULT_GRID_STEP};
use crate::error::{Error, Result};
use crate::link::{Detector, FrameConfig};
use crate::pulse::PulseSpec;

pub const PRESET_NAMES: [&str; 7] = [
    "scenario1",
    "scenario2",
    "narrowband",
    "table1-pds-20",
    "table1-pds-40",
    "table1-pds-60",
    "table1-pds-80",
];

const N_PATHS: usize = 10;
const BETA: f64 = 0.22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkScenario {
    pub name: String,
    pub profile: MultipathProfile,
    pub pulse: PulseSpec,
    pub frame: FrameConfig,
    pub detector: Detector,
    pub sync_rule: SyncRule,
    pub seed: u64,
}

impl Default for LinkScenario {
    fn default() -> Self {
        LinkScenario {
            name: "custom".into(),
            profile: MultipathProfile {
                n_paths: N_PATHS,
                t_m: 0.0,
                kind: ProfileKind::Uniform,
                kappa: 0.0,
            },
            pulse: PulseSpec { beta: BETA, ts: 1.0 },
            frame: FrameConfig::default(),
            detector: Detector::Method1,
            sync_rule: SyncRule::MaxH,
            seed: 1,
        }
    }
}

impl LinkScenario {
    pub fn preset(name: &str) -> Result<Self> {
        let canonical = name.replace('_', "-");
        let (kind, kappa, pds_pct) = match canonical.as_str() {
            "scenario1" => (ProfileKind::Exponential, 0.25, 20),
            "scenario2" => (ProfileKind::Uniform, 0.0, 60),
            "narrowband" => (ProfileKind::Uniform, 0.0, 0),
            other => match other.strip_prefix("table1-pds-").and_then(|p| p.parse::<u32>().ok()) {
                Some(p @ (20 | 40 | 60 | 80)) => (ProfileKind::Uniform, 0.0, p),
                _ => {
                    return Err(Error::Parse(format!(
                        "unknown preset '{name}' (known: {})",
                        PRESET_NAMES.join(", ")
                    )))
                }
            },
        };
        let mut s = LinkScenario {
            name: canonical,
            ..Default::default()
        };
        s.profile.kind = kind;
        s.profile.kappa = kappa;
        s.profile.t_m = pds_pct as f64 / 100.0 * s.pulse.ts;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.pulse.validate()?;
        self.frame.validate()
    }

    /// Percentage delay spread.
    pub fn pds(&self) -> f64 {
        pds(self.profile.t_m, self.pulse.ts)
    }

    pub fn synchronizer(&self) -> Result<Synchronizer> {
        Synchronizer::new(self.pulse, self.sync_rule, DEFAULT_GRID_STEP * self.pulse.ts, self.profile.t_m)
    }

    pub fn to_kv(&self) -> String {
        let kind = match self.profile.kind {
            ProfileKind::Uniform => "uniform",
            ProfileKind::Exponential => "exponential",
        };
        let mut out = String::new();
        let pairs: [(&str, String); 13] = [
            ("name", self.name.clone()),
            ("n_paths", self.profile.n_paths.to_string()),
            ("t_m", self.profile.t_m.to_string()),
            ("profile", kind.into()),
            ("kappa", self.profile.kappa.to_string()),
            ("beta", self.pulse.beta.to_string()),
            ("ts", self.pulse.ts.to_string()),
            ("frame_len", self.frame.frame_len.to_string()),
            ("oversample", self.frame.oversample.to_string()),
            ("guard", self.frame.guard.to_string()),
            ("detector", self.detector.as_str().into()),
            ("sync_rule", self.sync_rule.as_str().into()),
            ("seed", self.seed.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut s = LinkScenario::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Parse(format!("line {}: invalid {what} '{value}'", lineno + 1));
            let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            let int = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
            match key {
                "name" => s.name = value.to_string(),
                "n_paths" => s.profile.n_paths = int(key)?,
                "t_m" => s.profile.t_m = num(key)?,
                "profile" => {
                    s.profile.kind = match value {
                        "uniform" => ProfileKind::Uniform,
                        "exponential" => ProfileKind::Exponential,
                        _ => return Err(bad(key)),
                    }
                }
                "kappa" => s.profile.kappa = num(key)?,
                "beta" => s.pulse.beta = num(key)?,
                "ts" => s.pulse.ts = num(key)?,
                "frame_len" => s.frame.frame_len = int(key)?,
                "oversample" => s.frame.oversample = int(key)?,
                "guard" => s.frame.guard = int(key)?,
                "detector" => s.detector = value.parse()?,
                "sync_rule" => s.sync_rule = value.parse()?,
                "seed" => s.seed = value.parse().map_err(|_| bad(key))?,
                other => return Err(Error::Parse(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

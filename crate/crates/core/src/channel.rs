//! NLoS multipath realizations and the fading quantities derived from them.
//!
//! Delays are in seconds but every preset uses `ts = 1`, so they read as
//! fractions of a symbol period.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{AutocorrTable, PulseSpec};

/// Bound on the imaginary part of the Hermitian cross-sum in η_o².
const HERMITIAN_TOL: f64 = 1e-10;
/// Radicand values in (−RADICAND_GUARD, 0) are rounding and clamp to 0.
const RADICAND_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    Exponential,
}

/// Statistical description of the scattering environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipathProfile {
    pub n_paths: usize,
    /// Delay spread, in seconds.
    pub t_m: f64,
    pub kind: ProfileKind,
    /// Power decay per path index; ignored for [`ProfileKind::Uniform`].
    pub kappa: f64,
}

impl MultipathProfile {
    pub fn new(n_paths: usize, t_m: f64, kind: ProfileKind, kappa: f64) -> Result<Self> {
        let p = MultipathProfile { n_paths, t_m, kind, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("profile needs at least one path"));
        }
        if !(self.t_m >= 0.0 && self.t_m.is_finite()) {
            return Err(Error::invalid(format!("delay spread {} must be ≥ 0", self.t_m)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("decay rate {} must be ≥ 0", self.kappa)));
        }
        Ok(())
    }

    /// Mean path powers `E{α_n²}`, summing to one.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n_paths;
        match self.kind {
            ProfileKind::Uniform => vec![1.0 / n as f64; n],
            ProfileKind::Exponential => {
                let raw: Vec<f64> = (0..n).map(|i| (-2.0 * self.kappa * i as f64).exp()).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            }
        }
    }

    /// Draws one realization: `τ_0 = 0`, other delays uniform on `[0, t_m]`,
    /// uniform phases, Rayleigh amplitudes with `E{α_n²} = w_n`.
    pub fn sample_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let weights = self.weights();
        let n = self.n_paths;
        let mut delays = Vec::with_capacity(n);
        let mut gains = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for (i, w) in weights.iter().enumerate() {
            delays.push(if i == 0 { 0.0 } else { rng.random::<f64>() * self.t_m });
            // α² is exponential with mean w: Rayleigh with scale² = w/2.
            let e: f64 = rng.sample(Exp1);
            gains.push((w * e).sqrt());
            phases.push(rng.random::<f64>() * TAU);
        }
        ChannelRealization::from_parts_unchecked(delays, gains, phases)
    }
}

/// Percentage delay spread, `100·t_m/t_s`.
pub fn pds(t_m: f64, t_s: f64) -> f64 {
    t_m / t_s * 100.0
}

/// One draw of the multipath parameters.
///
/// Serializes as `{"delays": [...], "gains": [...], "phases": [...]}`; the
/// complex gains `γ_n = α_n·e^{−jφ_n}` are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationRecord", into = "RealizationRecord")]
pub struct ChannelRealization {
    delays: Vec<f64>,
    gains: Vec<f64>,
    phases: Vec<f64>,
    complex_gains: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RealizationRecord {
    delays: Vec<f64>,
    gains: Vec<f64>,
    phases: Vec<f64>,
}

impl TryFrom<RealizationRecord> for ChannelRealization {
    type Error = Error;
    fn try_from(r: RealizationRecord) -> Result<Self> {
        ChannelRealization::from_parts(r.delays, r.gains, r.phases)
    }
}

impl From<ChannelRealization> for RealizationRecord {
    fn from(c: ChannelRealization) -> Self {
        RealizationRecord {
            delays: c.delays,
            gains: c.gains,
            phases: c.phases,
        }
    }
}

impl ChannelRealization {
    pub fn from_parts(delays: Vec<f64>, gains: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        let n = delays.len();
        if n == 0 || gains.len() != n || phases.len() != n {
            return Err(Error::invalid(format!(
                "realization needs matching non-empty delays/gains/phases (got {}/{}/{})",
                n,
                gains.len(),
                phases.len()
            )));
        }
        if delays[0] != 0.0 || delays.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("delays must be finite, nonnegative, with the first at 0"));
        }
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) || phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("gains must be finite and nonnegative, phases finite"));
        }
        Ok(Self::from_parts_unchecked(delays, gains, phases))
    }

    /// Builds a realization directly from complex path gains.
    pub fn from_complex(delays: Vec<f64>, gains: &[Complex64]) -> Result<Self> {
        let (mags, phases) = gains
            .iter()
            .map(|g| (g.norm(), (-g.arg()).rem_euclid(TAU)))
            .unzip();
        Self::from_parts(delays, mags, phases)
    }

    fn from_parts_unchecked(delays: Vec<f64>, gains: Vec<f64>, phases: Vec<f64>) -> Self {
        let complex_gains = gains
            .iter()
            .zip(&phases)
            .map(|(a, p)| Complex64::from_polar(*a, -p))
            .collect();
        ChannelRealization {
            delays,
            gains,
            phases,
            complex_gains,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn complex_gains(&self) -> &[Complex64] {
        &self.complex_gains
    }

    /// `max_n |τ_n − τ_0|`.
    pub fn delay_spread(&self) -> f64 {
        let t0 = self.delays[0];
        self.delays.iter().fold(0.0, |m, d| m.max((d - t0).abs()))
    }

    /// Narrowband fading factor `g_o = Σ γ_n`.
    pub fn narrowband_g(&self) -> Complex64 {
        self.complex_gains.iter().sum()
    }

    /// `Σ γ_n R(τ_n − τ̂ − shift)`, unnormalized.
    fn correlate(&self, tau_hat: f64, spec: &PulseSpec) -> Complex64 {
        self.delays
            .iter()
            .zip(&self.complex_gains)
            .map(|(d, g)| g * spec.autocorr(d - tau_hat))
            .sum()
    }

    /// Multiplicative fading factor on the desired symbol when the receiver
    /// samples at `tau_hat`: `h_o = Σ γ_n R(τ_n − τ̂) / (1 − β/4)`.
    pub fn fading_h(&self, tau_hat: f64, spec: &PulseSpec) -> Complex64 {
        self.correlate(tau_hat, spec) / spec.signal_power()
    }

    /// Amplitude of the additive ISI term,
    /// `η_o² = (1−β/4)(Σ|γ_n|² − |h_o|²) + Σ_{n≠m} γ_n γ_m* R(τ_n − τ_m)`.
    pub fn fading_eta(&self, tau_hat: f64, spec: &PulseSpec) -> Result<f64> {
        let h = self.fading_h(tau_hat, spec);
        self.eta_given_h(h, spec)
    }

    fn eta_given_h(&self, h: Complex64, spec: &PulseSpec) -> Result<f64> {
        let power: f64 = self.complex_gains.iter().map(|g| g.norm_sqr()).sum();
        let mut cross = Complex64::new(0.0, 0.0);
        for (n, (dn, gn)) in self.delays.iter().zip(&self.complex_gains).enumerate() {
            for (m, (dm, gm)) in self.delays.iter().zip(&self.complex_gains).enumerate() {
                if n != m {
                    cross += gn * gm.conj() * spec.autocorr(dn - dm);
                }
            }
        }
        if cross.im.abs() > HERMITIAN_TOL {
            return Err(Error::Numerical(format!(
                "cross-sum has imaginary part {:e}",
                cross.im
            )));
        }
        let radicand = spec.signal_power() * (power - h.norm_sqr()) + cross.re;
        if radicand < -RADICAND_GUARD {
            return Err(Error::Numerical(format!("negative ISI power {radicand:e}")));
        }
        Ok(radicand.max(0.0).sqrt())
    }

    /// Three symbol-spaced taps `(h_v)_o = Σ γ_n R(τ_n − τ̂ − (v−1)T_s)/(1 − β/4)`.
    /// The first equals [`fading_h`](Self::fading_h).
    pub fn fading_taps(&self, tau_hat: f64, spec: &PulseSpec) -> [Complex64; 3] {
        let p = spec.signal_power();
        [0.0, 1.0, 2.0].map(|v| self.correlate(tau_hat + v * spec.ts, spec) / p)
    }

    /// Sampled end-to-end response `c_j = Σ_n γ_n g(τ̂ − τ_n + j·T_s)` for
    /// `j = −guard..=guard`. Sampling `r(t)` at `τ̂ + kT_s` gives
    /// `r(k) = Σ_j c_j I_{k−j}` up to pulse truncation.
    pub fn sampled_response(&self, tau_hat: f64, spec: &PulseSpec, guard: usize) -> Vec<Complex64> {
        let g = guard as isize;
        (-g..=g)
            .map(|j| {
                self.delays
                    .iter()
                    .zip(&self.complex_gains)
                    .map(|(d, gamma)| gamma * spec.rc_pulse(tau_hat - d + j as f64 * spec.ts))
                    .sum()
            })
            .collect()
    }
}

/// Fading quantities of one realization at one timing instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingPoint {
    pub h_o: Complex64,
    pub eta_o: f64,
    pub tau_hat: f64,
    pub taps: [Complex64; 3],
}

impl FadingPoint {
    pub fn compute(ch: &ChannelRealization, tau_hat: f64, spec: &PulseSpec) -> Result<Self> {
        let taps = ch.fading_taps(tau_hat, spec);
        let eta_o = ch.eta_given_h(taps[0], spec)?;
        Ok(FadingPoint {
            h_o: taps[0],
            eta_o,
            tau_hat,
            taps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncRule {
    /// Maximize `|h_o(τ)|` over the delay window.
    MaxH,
    /// Lock to the first arriving path.
    EarliestPath,
}

impl SyncRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            SyncRule::MaxH => "max_h",
            SyncRule::EarliestPath => "earliest_path",
        }
    }
}

impl std::str::FromStr for SyncRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_h" => Ok(SyncRule::MaxH),
            "earliest_path" => Ok(SyncRule::EarliestPath),
            other => Err(Error::Parse(format!("unknown sync rule '{other}'"))),
        }
    }
}

/// Default timing-search grid step, in symbol periods.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-6;

/// Receiver timing recovery.
///
/// Holds a tabulated autocorrelation so the grid scan in
/// [`SyncRule::MaxH`] stays cheap; the golden-section refinement and every
/// returned quantity use the exact kernel.
#[derive(Debug, Clone)]
pub struct Synchronizer {
    spec: PulseSpec,
    rule: SyncRule,
    grid_step: f64,
    table: AutocorrTable,
}

impl Synchronizer {
    /// `max_spread` sizes the lookup table; longer channels still work but
    /// fall back to the exact kernel.
    pub fn new(spec: PulseSpec, rule: SyncRule, grid_step: f64, max_spread: f64) -> Result<Self> {
        spec.validate()?;
        if !(grid_step > 0.0 && grid_step <= spec.ts / 100.0) {
            return Err(Error::invalid(format!(
                "grid step {grid_step} must be in (0, ts/100]"
            )));
        }
        Ok(Synchronizer {
            spec,
            rule,
            grid_step,
            table: AutocorrTable::new(&spec, max_spread.max(spec.ts)),
        })
    }

    pub fn rule(&self) -> SyncRule {
        self.rule
    }

    pub fn spec(&self) -> &PulseSpec {
        &self.spec
    }

    /// Timing instant `τ̂` for this realization.
    pub fn synchronize(&self, ch: &ChannelRealization) -> f64 {
        match self.rule {
            SyncRule::EarliestPath => ch.delays()[0],
            SyncRule::MaxH => self.max_h(ch),
        }
    }

    fn max_h(&self, ch: &ChannelRealization) -> f64 {
        let spread = ch.delay_spread();
        if spread == 0.0 {
            return 0.0;
        }
        let delays = ch.delays();
        let gains = ch.complex_gains();
        let steps = (spread / self.grid_step).floor() as usize;
        let grid_point = |i: usize| if i > steps { spread } else { i as f64 * self.grid_step };
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..=steps + 1 {
            let tau = grid_point(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (d, g) in delays.iter().zip(gains) {
                acc += g * self.table.eval(d - tau);
            }
            let m = acc.norm_sqr();
            if m > best.1 {
                best = (i, m);
            }
        }
        let centre = grid_point(best.0);
        let objective = |tau: f64| ch.fading_h(tau, &self.spec).norm_sqr();
        let lo = (centre - self.grid_step).max(0.0);
        let hi = (centre + self.grid_step).min(spread);
        let refined = golden_section_max(objective, lo, hi, GOLDEN_TOL * self.spec.ts);
        if objective(refined) >= objective(centre) {
            refined
        } else {
            centre
        }
    }
}

/// Timing recovery with a freshly built synchronizer. Use [`Synchronizer`]
/// directly inside loops.
pub fn synchronize(ch: &ChannelRealization, spec: &PulseSpec, rule: SyncRule, grid_step: f64) -> Result<f64> {
    Ok(Synchronizer::new(*spec, rule, grid_step, ch.delay_spread())?.synchronize(ch))
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

//! Frame-based Monte Carlo transmission of BPSK over a multipath channel.
//!
//! Each frame draws a fresh channel realization, synchronizes, transmits
//! `frame_len` symbols in isolation (no symbols before or after the frame)
//! and samples the received waveform once per symbol at `τ̂ + kT_s`. Noise is
//! added at symbol rate.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Synchronizer};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::rng::{stream, Purpose};
use crate::scenario::LinkScenario;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Bits (= BPSK symbols) per frame.
    pub frame_len: usize,
    /// Samples per symbol period when the continuous waveform is examined
    /// (sampling-phase averages in the waveform oracles).
    pub oversample: usize,
    /// Pulse tails are truncated at ±`guard` symbol periods.
    pub guard: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            frame_len: 100,
            oversample: 64,
            guard: 16,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 3 {
            return Err(Error::invalid(format!("frame length {} must be at least 3", self.frame_len)));
        }
        if self.oversample < 16 {
            return Err(Error::invalid(format!("oversampling {} must be at least 16", self.oversample)));
        }
        if self.guard == 0 {
            return Err(Error::invalid("guard must be at least one symbol period"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    /// Symbol-by-symbol matched filter scaled by `h_o`.
    Method1,
    /// Three-tap successive interference cancellation.
    Method2,
}

impl Detector {
    pub const ALL: [Detector; 2] = [Detector::Method1, Detector::Method2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Detector::Method1 => "method1",
            Detector::Method2 => "method2",
        }
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "method1" => Ok(Detector::Method1),
            "method2" => Ok(Detector::Method2),
            other => Err(Error::Parse(format!("unknown detector '{other}' (expected method1 or method2)"))),
        }
    }
}

/// Simulated BER at one SNR for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub detector: Detector,
    pub snr_db: f64,
    /// Requested average SNR, linear.
    pub snr: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frames: u64,
    pub ber: f64,
    /// 95% half-width treating frames (one channel draw each) as the
    /// independent unit.
    pub ci_halfwidth: f64,
    /// 95% half-width under the binomial model that treats every bit as
    /// independent. Narrower than `ci_halfwidth` under block fading.
    pub ci_binomial: f64,
    /// Set when no errors were seen; `ci_halfwidth` is then the one-sided
    /// rule-of-three bound `3/bits`.
    pub one_sided: bool,
    /// Noiseless received power divided by the noise variance, measured on
    /// the simulated frames.
    pub measured_snr: f64,
}

impl BerPoint {
    fn from_counts(detector: Detector, snr_db: f64, frame_len: usize, acc: &ErrorTally, measured_snr: f64) -> Self {
        let bits = acc.frames * frame_len as u64;
        let ber = if bits == 0 { 0.0 } else { acc.errors as f64 / bits as f64 };
        let ci_binomial = if bits == 0 { 0.0 } else { Z95 * (ber * (1.0 - ber) / bits as f64).sqrt() };
        let one_sided = acc.errors == 0;
        let ci_halfwidth = if bits == 0 {
            0.0
        } else if one_sided {
            3.0 / bits as f64
        } else {
            // Between-frame variance of the per-frame error fraction.
            let f = acc.frames as f64;
            let l = frame_len as f64;
            let mean = acc.errors as f64 / f;
            let var = if acc.frames > 1 {
                ((acc.errors_sq as f64 - f * mean * mean) / (f - 1.0)).max(0.0)
            } else {
                0.0
            };
            Z95 * (var / f).sqrt() / l
        };
        BerPoint {
            detector,
            snr_db,
            snr: db_to_linear(snr_db),
            bit_errors: acc.errors,
            bits,
            frames: acc.frames,
            ber,
            ci_halfwidth,
            ci_binomial,
            one_sided,
            measured_snr,
        }
    }
}

/// Monte Carlo stopping rule, checked after each batch of frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 200,
            max_bits: 100_000_000,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// BPSK map `0 → −1`, `1 → +1`.
pub fn modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { -1.0 } else { 1.0 }).collect()
}

/// Noiseless symbol-rate samples `r(k) = √Es·Σ_j c_j I_{k−j}` of an isolated
/// frame, where `response[guard + j] = c_j`.
pub fn apply_response(amps: &[f64], response: &[Complex64], es: f64) -> Vec<Complex64> {
    let guard = (response.len() / 2) as isize;
    let n = amps.len() as isize;
    let scale = es.sqrt();
    (0..n)
        .map(|k| {
            let lo = (k - guard).max(0);
            let hi = (k + guard).min(n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for m in lo..=hi {
                acc += response[(k - m + guard) as usize] * amps[m as usize];
            }
            acc * scale
        })
        .collect()
}

fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], noise_var: f64, rng: &mut R) {
    let std = (0.5 * noise_var).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(re, im) * std;
    }
}

/// Received symbol-rate samples `r'(k)` for one frame: the multipath sum of
/// raised-cosine pulses sampled at `τ̂ + kT_s`, plus complex Gaussian noise
/// of variance `noise_var` per sample.
#[allow(clippy::too_many_arguments)]
pub fn received_samples<R: Rng + ?Sized>(
    amps: &[f64],
    ch: &ChannelRealization,
    tau_hat: f64,
    spec: &PulseSpec,
    cfg: &FrameConfig,
    es: f64,
    noise_var: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let response = ch.sampled_response(tau_hat, spec, cfg.guard);
    let mut r = apply_response(amps, &response, es);
    if noise_var > 0.0 {
        add_noise(&mut r, noise_var, rng);
    }
    r
}

fn slice(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Method 1: `Δ(k) = Re[h_o*·r'(k)]/(√Es·|h_o|²)`, decided by sign.
pub fn detect_method1(r: &[Complex64], h_o: Complex64, es: f64) -> Result<Vec<f64>> {
    let power = h_o.norm_sqr();
    if power == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let scale = 1.0 / (es.sqrt() * power);
    Ok(r.iter().map(|&x| slice((h_o.conj() * x).re * scale)).collect())
}

/// Method 2: before slicing symbol `k`, subtract the contributions of the
/// two previous decisions in the frame through taps 2 and 3.
pub fn detect_method2(r: &[Complex64], taps: &[Complex64; 3], es: f64) -> Result<Vec<f64>> {
    let power = taps[0].norm_sqr();
    if power == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let sqrt_es = es.sqrt();
    let scale = 1.0 / (sqrt_es * power);
    let mut out: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &x) in r.iter().enumerate() {
        let mut y = x;
        if k >= 1 {
            y -= taps[1] * (sqrt_es * out[k - 1]);
        }
        if k >= 2 {
            y -= taps[2] * (sqrt_es * out[k - 2]);
        }
        out.push(slice((taps[0].conj() * y).re * scale));
    }
    Ok(out)
}

/// Mean noiseless received power per symbol, `E{Σ_j |c_j|²}` for unit `Es`,
/// used to turn an SNR into a noise variance. Estimated by Monte Carlo over
/// channel draws with total path power (mean one) as a control variate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rx_power: f64,
    pub realizations: u64,
}

pub const CALIBRATION_REALIZATIONS: u64 = 100_000;

impl Calibration {
    pub fn estimate(scenario: &LinkScenario, realizations: u64) -> Result<Self> {
        if realizations == 0 {
            return Err(Error::invalid("calibration needs at least one realization"));
        }
        let sync = scenario.synchronizer()?;
        let spec = scenario.pulse;
        let guard = scenario.frame.guard;
        // (received power, total path power) per realization.
        let pairs: Vec<(f64, f64)> = (0..realizations)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(scenario.seed, Purpose::Calibration, i);
                let ch = scenario.profile.sample_realization(&mut rng);
                let tau = sync.synchronize(&ch);
                let rx = ch.sampled_response(tau, &spec, guard).iter().map(|c| c.norm_sqr()).sum();
                let paths = ch.gains().iter().map(|a| a * a).sum();
                (rx, paths)
            })
            .collect();
        Ok(Calibration {
            rx_power: control_variate_mean(&pairs, 1.0),
            realizations,
        })
    }

    /// Noise variance giving average SNR `snr` (linear) at unit `Es`.
    pub fn noise_var(&self, snr: f64) -> f64 {
        self.rx_power / snr
    }
}

/// Mean of `x` using `y` (with known mean `y_mean`) as a control variate.
/// Total path power tracks received power closely, which removes most of
/// the block-fading variance from the estimate.
fn control_variate_mean(pairs: &[(f64, f64)], y_mean: f64) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut syy) = (0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if syy <= 0.0 {
        return mx;
    }
    mx - sxy / syy * (my - y_mean)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ErrorTally {
    errors: u64,
    errors_sq: u64,
    frames: u64,
}

impl ErrorTally {
    fn add(&mut self, e: u32) {
        self.errors += e as u64;
        self.errors_sq += (e as u64) * (e as u64);
        self.frames += 1;
    }
}

/// Everything one frame needs, independent of the SNR.
struct FrameDraw {
    amps: Vec<f64>,
    clean: Vec<Complex64>,
    noise: Vec<Complex64>,
    h_o: Complex64,
    taps: [Complex64; 3],
}

struct FrameEngine<'a> {
    scenario: &'a LinkScenario,
    sync: Synchronizer,
}

impl FrameEngine<'_> {
    /// Channel, bits and unit-variance noise for frame `index`. The same
    /// draw is reused at every SNR, so curves are smooth in SNR and results
    /// at one SNR do not depend on the rest of the grid.
    fn draw(&self, index: u64) -> FrameDraw {
        let s = self.scenario;
        let mut rng = stream(s.seed, Purpose::Frames, index);
        let ch = s.profile.sample_realization(&mut rng);
        let tau = self.sync.synchronize(&ch);
        let taps = ch.fading_taps(tau, &s.pulse);
        let n = s.frame.frame_len;
        let mut bits = vec![0u8; n];
        for chunk in bits.chunks_mut(64) {
            let word: u64 = rng.random();
            for (i, b) in chunk.iter_mut().enumerate() {
                *b = ((word >> i) & 1) as u8;
            }
        }
        let amps = modulate(&bits);
        let response = ch.sampled_response(tau, &s.pulse, s.frame.guard);
        let clean = apply_response(&amps, &response, 1.0);
        let mut noise = vec![Complex64::new(0.0, 0.0); n];
        add_noise(&mut noise, 1.0, &mut rng);
        FrameDraw {
            amps,
            clean,
            noise,
            h_o: taps[0],
            taps,
        }
    }

    fn errors(&self, d: &FrameDraw, noise_var: f64, detectors: &[Detector]) -> Result<Vec<u32>> {
        let std = noise_var.sqrt();
        let r: Vec<Complex64> = d.clean.iter().zip(&d.noise).map(|(c, z)| c + z * std).collect();
        detectors
            .iter()
            .map(|det| {
                let decided = match det {
                    Detector::Method1 => detect_method1(&r, d.h_o, 1.0)?,
                    Detector::Method2 => detect_method2(&r, &d.taps, 1.0)?,
                };
                Ok(decided.iter().zip(&d.amps).filter(|(a, b)| a != b).count() as u32)
            })
            .collect()
    }
}

const FIRST_BATCH: u64 = 256;
const MAX_BATCH: u64 = 8192;

/// BER of several detectors on the same frames at every SNR in `snr_db`.
/// Returns one row per SNR holding one point per detector, in the order of
/// `detectors`. Frames are added in batches until every detector has
/// `min_errors` errors or `max_bits` bits have been sent.
pub fn run_ber_paired(
    scenario: &LinkScenario,
    calibration: &Calibration,
    snr_db: &[f64],
    stop: StopRule,
    detectors: &[Detector],
) -> Result<Vec<Vec<BerPoint>>> {
    scenario.validate()?;
    if detectors.is_empty() {
        return Err(Error::invalid("no detectors requested"));
    }
    let frame_len = scenario.frame.frame_len as u64;
    let max_frames = (stop.max_bits / frame_len).max(1);
    let engine = FrameEngine {
        scenario,
        sync: scenario.synchronizer()?,
    };
    let mut rows = Vec::with_capacity(snr_db.len());
    for &db in snr_db {
        let noise_var = calibration.noise_var(db_to_linear(db));
        let mut tallies = vec![ErrorTally::default(); detectors.len()];
        let mut signal_energy = 0.0;
        let mut frames = 0u64;
        let mut batch = FIRST_BATCH;
        loop {
            let end = (frames + batch).min(max_frames);
            let outcomes: Vec<(Vec<u32>, f64)> = (frames..end)
                .into_par_iter()
                .map(|i| {
                    let d = engine.draw(i);
                    let energy: f64 = d.clean.iter().map(|c| c.norm_sqr()).sum();
                    Ok((engine.errors(&d, noise_var, detectors)?, energy))
                })
                .collect::<Result<_>>()?;
            for (errs, energy) in outcomes {
                for (t, e) in tallies.iter_mut().zip(errs) {
                    t.add(e);
                }
                signal_energy += energy;
            }
            frames = end;
            let enough = tallies.iter().all(|t| t.errors >= stop.min_errors);
            if enough || frames >= max_frames {
                break;
            }
            batch = (batch * 2).min(MAX_BATCH);
        }
        let measured_snr = signal_energy / (frames * frame_len) as f64 / noise_var;
        rows.push(
            detectors
                .iter()
                .zip(&tallies)
                .map(|(&det, t)| BerPoint::from_counts(det, db, scenario.frame.frame_len, t, measured_snr))
                .collect(),
        );
    }
    Ok(rows)
}

/// BER of the scenario's own detector over the SNR grid.
pub fn run_ber(scenario: &LinkScenario, snr_db: &[f64], stop: StopRule) -> Result<Vec<BerPoint>> {
    let calibration = Calibration::estimate(scenario, CALIBRATION_REALIZATIONS)?;
    Ok(run_ber_paired(scenario, &calibration, snr_db, stop, &[scenario.detector])?
        .into_iter()
        .map(|mut row| row.remove(0))
        .collect())
}

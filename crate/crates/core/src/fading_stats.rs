//! The bimodal density of the mediumband fading factor.
//!
//! Real and imaginary parts of `h_o` are modelled as independent with the
//! marginal
//!
//! ```text
//!            exp(−x²/2λ0²) − K·exp(−x²/2λ1²)
//!   f(x) = ───────────────────────────────────
//!               √(2π)·(λ0 − K·λ1)
//! ```
//!
//! where `λ0 = σ_O` and `λ1² = σ_O²σ_I²/(σ_O² + σ_I²)`. `K` sets the depth of
//! the trench at the origin and `σ_I` its width.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, SimplexOptions};
use crate::rng::{stream, Purpose};

/// Reference parameters by percentage delay spread at κ = 0, N = 10,
/// β = 0.22: `(pds, K, σ_I², σ_O²)`.
pub const TABLE1: [(u32, f64, f64, f64); 5] = [
    (0, 0.0, 0.0, 0.5),
    (20, 0.470, 0.0045, 0.4500),
    (40, 0.660, 0.0090, 0.4310),
    (60, 0.770, 0.0200, 0.4200),
    (80, 0.830, 0.0280, 0.4160),
];

pub const K_MAX: f64 = 0.999;
pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 10.0;
pub const MIN_FIT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct BimodalParams {
    k: f64,
    sigma_o: f64,
    sigma_i: f64,
    lambda0: f64,
    lambda1: f64,
}

/// JSON form; derived quantities are written for convenience and ignored on
/// read.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamsRecord {
    k: f64,
    sigma_o: f64,
    sigma_i: f64,
    #[serde(default, skip_deserializing)]
    sigma_o2: f64,
    #[serde(default, skip_deserializing)]
    sigma_i2: f64,
    #[serde(default, skip_deserializing)]
    lambda0: f64,
    #[serde(default, skip_deserializing)]
    lambda1: f64,
    #[serde(default, skip_deserializing)]
    xi: f64,
}

impl TryFrom<ParamsRecord> for BimodalParams {
    type Error = Error;
    fn try_from(r: ParamsRecord) -> Result<Self> {
        BimodalParams::new(r.k, r.sigma_o, r.sigma_i)
    }
}

impl From<BimodalParams> for ParamsRecord {
    fn from(p: BimodalParams) -> Self {
        ParamsRecord {
            k: p.k,
            sigma_o: p.sigma_o,
            sigma_i: p.sigma_i,
            sigma_o2: p.sigma_o * p.sigma_o,
            sigma_i2: p.sigma_i * p.sigma_i,
            lambda0: p.lambda0,
            lambda1: p.lambda1,
            xi: p.xi(),
        }
    }
}

impl BimodalParams {
    pub fn new(k: f64, sigma_o: f64, sigma_i: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(Error::invalid(format!("trench depth K = {k} outside [0, 1)")));
        }
        if !(sigma_o > 0.0 && sigma_o.is_finite()) {
            return Err(Error::invalid(format!("σ_O = {sigma_o} must be positive")));
        }
        if !(sigma_i >= 0.0 && sigma_i.is_finite()) {
            return Err(Error::invalid(format!("σ_I = {sigma_i} must be nonnegative")));
        }
        if sigma_i == 0.0 && k > 0.0 {
            return Err(Error::invalid("a zero-width trench (σ_I = 0) requires K = 0"));
        }
        let lambda0 = sigma_o;
        let lambda1 = (sigma_o * sigma_o * sigma_i * sigma_i / (sigma_o * sigma_o + sigma_i * sigma_i)).sqrt();
        let p = BimodalParams {
            k,
            sigma_o,
            sigma_i,
            lambda0,
            lambda1,
        };
        if !(lambda0 - k * lambda1 > 0.0) {
            return Err(Error::invalid("λ0 − K·λ1 must be positive"));
        }
        let span = 8.0 * lambda0;
        if (0..=400).any(|i| p.pdf_marginal(-span + span * i as f64 / 200.0) < 0.0) {
            return Err(Error::invalid("density is negative somewhere"));
        }
        Ok(p)
    }

    /// Parameters given as `(K, σ_I², σ_O²)`, the tabulated form.
    pub fn from_variances(k: f64, sigma_i2: f64, sigma_o2: f64) -> Result<Self> {
        if sigma_i2 < 0.0 || sigma_o2 < 0.0 {
            return Err(Error::invalid("variances must be nonnegative"));
        }
        Self::new(k, sigma_o2.sqrt(), sigma_i2.sqrt())
    }

    /// Tabulated parameters for the given PDS, if there is a row for it.
    pub fn table1(pds: u32) -> Option<Self> {
        TABLE1
            .iter()
            .find(|r| r.0 == pds)
            .map(|&(_, k, si2, so2)| Self::from_variances(k, si2, so2).expect("tabulated rows are valid"))
    }

    /// Gaussian limit with per-component variance `var`.
    pub fn gaussian(var: f64) -> Result<Self> {
        Self::new(0.0, var.sqrt(), 0.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn sigma_o(&self) -> f64 {
        self.sigma_o
    }
    pub fn sigma_i(&self) -> f64 {
        self.sigma_i
    }
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    /// `ξ = λ0/(λ0 − Kλ1) ≥ 1`.
    pub fn xi(&self) -> f64 {
        self.lambda0 / self.norm_width()
    }
    /// `λ0 − Kλ1`.
    pub fn norm_width(&self) -> f64 {
        self.lambda0 - self.k * self.lambda1
    }
    /// `(ξ − 1)/λ1`, computed as `K/(λ0 − Kλ1)` so it stays finite at λ1 = 0.
    pub fn xi_minus_one_over_lambda1(&self) -> f64 {
        self.k / self.norm_width()
    }

    /// `K/λ1^power`, taken as 0 when K = 0 (then λ1 may be 0).
    pub(crate) fn k_over_lambda1_pow(&self, power: i32) -> f64 {
        if self.k == 0.0 {
            0.0
        } else {
            self.k / self.lambda1.powi(power)
        }
    }

    /// Density of either the real or the imaginary part.
    pub fn pdf_marginal(&self, x: f64) -> f64 {
        let x2 = x * x;
        let outer = (-x2 / (2.0 * self.lambda0 * self.lambda0)).exp();
        let inner = if self.k == 0.0 {
            0.0
        } else {
            self.k * (-x2 / (2.0 * self.lambda1 * self.lambda1)).exp()
        };
        (outer - inner) / ((2.0 * PI).sqrt() * self.norm_width())
    }

    /// Closed-form marginal CDF, `[λ0Φ(x/λ0) − Kλ1Φ(x/λ1)]/(λ0 − Kλ1)`.
    pub fn cdf_marginal(&self, x: f64) -> f64 {
        let phi = |z: f64| 0.5 * libm::erfc(-z / SQRT_2);
        let inner = if self.k == 0.0 {
            0.0
        } else {
            self.k * self.lambda1 * phi(x / self.lambda1)
        };
        (self.lambda0 * phi(x / self.lambda0) - inner) / self.norm_width()
    }

    /// `E{|h_o|²} = 2(λ0³ − Kλ1³)/(λ0 − Kλ1)`.
    pub fn second_moment(&self) -> f64 {
        2.0 * (self.lambda0.powi(3) - self.k * self.lambda1.powi(3)) / self.norm_width()
    }

    /// Rejection sampler for one marginal component: Gaussian proposal with
    /// variance λ0², accepted with probability `1 − K·exp(−x²(1/2λ1² − 1/2λ0²))`.
    /// Overall acceptance is `1 − Kλ1/λ0`.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let decay = if self.k == 0.0 {
            0.0
        } else {
            0.5 / (self.lambda1 * self.lambda1) - 0.5 / (self.lambda0 * self.lambda0)
        };
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.lambda0 * z;
            if self.k == 0.0 {
                return x;
            }
            let u: f64 = rng.random();
            if u >= self.k * (-x * x * decay).exp() {
                return x;
            }
        }
    }

    /// Draws `h` with independent real and imaginary parts.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        Complex64::new(self.sample_component(rng), self.sample_component(rng))
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub params: BimodalParams,
    /// Negative log-likelihood of the pooled real and imaginary parts.
    pub nll: f64,
    pub sample_count: usize,
    /// Total simplex iterations over all restarts.
    pub iterations: usize,
    /// True when the trench did not improve the likelihood enough over the
    /// plain Gaussian and the Gaussian was reported instead.
    pub gaussian_fallback: bool,
}

/// Negative log-likelihood of the pooled components under the model.
struct Likelihood {
    sq: Vec<f64>,
    sum_sq: f64,
}

impl Likelihood {
    fn new(samples: &[Complex64]) -> Self {
        let sq: Vec<f64> = samples
            .iter()
            .flat_map(|h| [h.re * h.re, h.im * h.im])
            .collect();
        let sum_sq = sq.iter().sum();
        Likelihood { sq, sum_sq }
    }

    fn count(&self) -> f64 {
        self.sq.len() as f64
    }

    fn nll(&self, k: f64, sigma_o: f64, sigma_i: f64) -> f64 {
        let l0s = sigma_o * sigma_o;
        let l1s = l0s * sigma_i * sigma_i / (l0s + sigma_i * sigma_i);
        let width = sigma_o - k * l1s.sqrt();
        if !(width > 0.0) {
            return f64::INFINITY;
        }
        let decay = 0.5 / l1s - 0.5 / l0s;
        let mut trench = 0.0;
        if k > 0.0 {
            for &x2 in &self.sq {
                trench += (-k * (-x2 * decay).exp()).ln_1p();
            }
        }
        self.sum_sq / (2.0 * l0s) - trench + self.count() * ((2.0 * PI).sqrt() * width).ln()
    }

    /// Gaussian MLE: per-component variance and its nll.
    fn gaussian(&self) -> (f64, f64) {
        let var = self.sum_sq / self.count();
        let n = self.count();
        (var, 0.5 * n + 0.5 * n * (2.0 * PI * var).ln())
    }

    /// Crude starting point: λ0 from the second moment, trench depth from the
    /// empirical density at the origin against the Gaussian peak.
    fn moment_start(&self) -> [f64; 3] {
        let (var, _) = self.gaussian();
        let sigma_o = var.sqrt();
        let delta = 0.05 * sigma_o;
        let near = self.sq.iter().filter(|&&x2| x2 < delta * delta).count() as f64;
        let density0 = near / (self.count() * 2.0 * delta);
        let ratio = (density0 * (2.0 * PI).sqrt() * sigma_o).clamp(0.0, 1.0);
        let r0 = 0.15;
        let k = ((1.0 - ratio) / (1.0 - ratio * r0)).clamp(0.0, 0.9);
        let sigma_i = r0 * sigma_o / (1.0 - r0 * r0).sqrt();
        [k, sigma_o, sigma_i]
    }
}

/// Half the 0.999 quantile of χ² with two degrees of freedom: the trench
/// (K, σ_I) must lower the nll by at least this much to be reported.
const TRENCH_NLL_THRESHOLD: f64 = 6.9078;
const RESTARTS: usize = 5;

/// Maximum-likelihood estimate of `(K, σ_O, σ_I)` from samples of `h_o`,
/// pooling real and imaginary parts.
pub fn fit(samples: &[Complex64]) -> Result<FitReport> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let lik = Likelihood::new(samples);
    let lower = [0.0, SIGMA_MIN, SIGMA_MIN];
    let upper = [K_MAX, SIGMA_MAX, SIGMA_MAX];
    let base = lik.moment_start();
    let mut jitter = stream(0, Purpose::BimodalSampling, u64::MAX);

    let mut best: Option<optim::SimplexResult> = None;
    let mut iterations = 0;
    let mut any_converged = false;
    for restart in 0..RESTARTS {
        let start = if restart == 0 {
            base
        } else {
            [
                (base[0] + jitter.random_range(-0.3..0.3)).clamp(0.0, 0.95),
                base[1] * jitter.random_range(0.85..1.15),
                base[2] * jitter.random_range(0.3..3.0),
            ]
        };
        let steps = [0.1, 0.1 * start[1], 0.3 * start[2]];
        let res = optim::minimize(
            |p| lik.nll(p[0], p[1], p[2]),
            &start,
            &steps,
            &lower,
            &upper,
            SimplexOptions {
                max_iterations: 1500,
                f_tol: 1e-13,
                x_tol: 1e-6,
            },
        );
        iterations += res.iterations;
        any_converged |= res.converged;
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one restart");
    let (var, gauss_nll) = lik.gaussian();
    let (params, nll, gaussian_fallback) = if gauss_nll - best.value < TRENCH_NLL_THRESHOLD {
        (BimodalParams::new(0.0, var.sqrt(), SIGMA_MIN)?, gauss_nll, true)
    } else {
        (BimodalParams::new(best.x[0], best.x[1], best.x[2])?, best.value, false)
    };
    let report = FitReport {
        params,
        nll,
        sample_count: samples.len(),
        iterations,
        gaussian_fallback,
    };
    if !any_converged {
        return Err(Error::FitFailed {
            best: Box::new(report),
            iterations,
        });
    }
    Ok(report)
}

/// Fixed-width histogram normalized to a density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Samples outside `[edges[0], edges[last]]`.
    pub outside: usize,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::invalid("histogram needs bins > 0 and hi > lo"));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        let mut total = 0usize;
        let mut outside = 0usize;
        for v in values {
            total += 1;
            if v < lo || v > hi {
                outside += 1;
                continue;
            }
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let scale = if total == 0 { 0.0 } else { 1.0 / (total as f64 * width) };
        Ok(Histogram {
            edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
            density: counts.into_iter().map(|c| c as f64 * scale).collect(),
            outside,
        })
    }
}

//! Analytic BER expressions for the bimodal fading model.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading_stats::BimodalParams;
use crate::quadrature::integrate;

const QUAD_TOL: f64 = 1e-12;
const QUAD_DEPTH: u32 = 40;

/// BER of the form `ρ1·Q(√(ρ2·γ))` on an AWGN channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub rho1: f64,
    pub rho2: f64,
}

impl ModulationParams {
    pub const BPSK: ModulationParams = ModulationParams { rho1: 1.0, rho2: 2.0 };

    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        if !(rho1 > 0.0 && rho2 > 0.0 && rho1.is_finite() && rho2.is_finite()) {
            return Err(Error::invalid("ρ1 and ρ2 must be positive"));
        }
        Ok(ModulationParams { rho1, rho2 })
    }
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self::BPSK
    }
}

/// Leading three coefficients of the inverse-SNR expansion of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

/// Gaussian tail probability `Q(x) = ½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Lower bound on the BER at average SNR `gamma_bar` (linear), from the
/// finite-range integral form of `Q`.
pub fn lower_bound(gamma_bar: f64, p: &BimodalParams, m: &ModulationParams) -> f64 {
    let xi = p.xi();
    let a0 = m.rho2 * p.lambda0().powi(2) * gamma_bar;
    let a1 = m.rho2 * p.lambda1().powi(2) * gamma_bar;
    let has_trench = p.k() > 0.0;
    let integrand = |theta: f64| {
        let s = theta.sin();
        if s == 0.0 {
            return if gamma_bar == 0.0 { 1.0 } else { 0.0 };
        }
        let mut v = xi * s / (a0 + s * s).sqrt();
        if has_trench {
            v -= (xi - 1.0) * s / (a1 + s * s).sqrt();
        }
        v * v
    };
    m.rho1 / PI * integrate(integrand, 0.0, FRAC_PI_2, QUAD_TOL, QUAD_DEPTH).value
}

/// High-SNR asymptote of [`lower_bound`]:
/// `ρ1/(4ρ2)·(ξ/λ0 − (ξ−1)/λ1)²/γ̄`.
pub fn asymptote(gamma_bar: f64, p: &BimodalParams, m: &ModulationParams) -> f64 {
    asymptote_coefficient(p, m) / gamma_bar
}

pub fn asymptote_coefficient(p: &BimodalParams, m: &ModulationParams) -> f64 {
    let d = p.xi() / p.lambda0() - p.xi_minus_one_over_lambda1();
    m.rho1 / (4.0 * m.rho2) * d * d
}

pub fn series_coefficients(p: &BimodalParams, m: &ModulationParams) -> SeriesCoefficients {
    let (k, l0) = (p.k(), p.lambda0());
    let d2 = p.norm_width().powi(2);
    let (r1, r2) = (m.rho1, m.rho2);
    let s2 = 1.0 / (l0 * l0) - p.k_over_lambda1_pow(2);
    let s4 = 1.0 / l0.powi(4) - p.k_over_lambda1_pow(4);
    SeriesCoefficients {
        gamma1: r1 * (1.0 - k).powi(2) / (4.0 * r2 * d2),
        gamma2: -3.0 * r1 * (1.0 - k) * s2 / (16.0 * r2 * r2 * d2),
        gamma3: 5.0 * r1 / (128.0 * r2.powi(3) * d2) * (s2 * s2 + 3.0 * (1.0 - k) * s4),
    }
}

pub fn series_eval(gamma_bar: f64, c: &SeriesCoefficients) -> f64 {
    let x = 1.0 / gamma_bar;
    ((c.gamma3 * x + c.gamma2) * x + c.gamma1) * x
}

/// BPSK over Rayleigh fading with unit mean power.
pub fn rayleigh_ber(gamma_bar: f64) -> f64 {
    0.5 * (1.0 - (gamma_bar / (1.0 + gamma_bar)).sqrt())
}

/// `∫₀^{π/2} sinⁿθ dθ`.
pub fn beta_moment(n: u32) -> f64 {
    let (mut even, mut odd) = (FRAC_PI_2, 1.0);
    for j in 2..=n {
        let r = (j - 1) as f64 / j as f64;
        if j % 2 == 0 {
            even *= r;
        } else {
            odd *= r;
        }
    }
    if n % 2 == 0 {
        even
    } else {
        odd
    }
}

/// `−d log P / d log γ̄` by a central difference over `±half_width_db`.
pub fn local_slope<F: Fn(f64) -> f64>(ber: F, gamma_db: f64, half_width_db: f64) -> f64 {
    let at = |db: f64| ber(10f64.powf(db / 10.0)).log10();
    -(at(gamma_db + half_width_db) - at(gamma_db - half_width_db)) / (2.0 * half_width_db / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

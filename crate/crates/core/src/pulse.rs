//! Raised-cosine pulse and the autocorrelation of the pulse-shaped BPSK
//! process.
//!
//! Time is handled internally in units of the symbol period. Both functions
//! are ratios whose denominators vanish at isolated points where the
//! numerator vanishes too. Within [`POLE_WINDOW`] of such a point the value
//! comes from a 4th-order Taylor expansion of the ratio, built with
//! truncated power-series arithmetic, so no branch ever divides 0 by 0.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width (in symbol periods) of the neighbourhood around a removable
/// singularity that is evaluated by series expansion.
pub const POLE_WINDOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Roll-off factor in [0, 1].
    pub beta: f64,
    /// Symbol period in seconds.
    pub ts: f64,
}

impl PulseSpec {
    pub fn new(beta: f64, ts: f64) -> Result<Self> {
        let spec = PulseSpec { beta, ts };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("roll-off {} outside [0, 1]", self.beta)));
        }
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::invalid(format!("symbol period {} must be positive", self.ts)));
        }
        Ok(())
    }

    /// Mean power of the pulse-shaped unit-energy BPSK process, `R(0) = 1 − β/4`.
    pub fn signal_power(&self) -> f64 {
        1.0 - 0.25 * self.beta
    }

    /// Raised-cosine pulse `g(t)`; `g(0) = 1`, zero at nonzero multiples of `ts`.
    pub fn rc_pulse(&self, t: f64) -> f64 {
        rc_normalized(t / self.ts, self.beta)
    }

    /// Autocorrelation `R(τ) = E{s(t)s(t+τ)}` of the transmitted process.
    pub fn autocorr(&self, tau: f64) -> f64 {
        autocorr_normalized(tau / self.ts, self.beta)
    }

    /// Zeros of the autocorrelation's denominators, `±ts/(2β)` and `±ts/β`,
    /// in ascending order. Empty for `β = 0`.
    pub fn singular_points(&self) -> Vec<f64> {
        if self.beta == 0.0 {
            return Vec::new();
        }
        let a = self.ts / (2.0 * self.beta);
        let b = self.ts / self.beta;
        vec![-b, -a, a, b]
    }
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// `sinc(a·x)·cos(π·b·x) / (1 − (c·x)²)` for `x ≥ 0`.
fn ratio_term(x: f64, a: f64, b: f64, c: f64) -> f64 {
    if c > 0.0 {
        let pole = 1.0 / c;
        if (x - pole).abs() < POLE_WINDOW {
            return ratio_term_near_pole(x - pole, pole, a, b, c);
        }
    }
    let cx = c * x;
    sinc(a * x) * (PI * b * x).cos() / (1.0 - cx * cx)
}

/// Series expansion of [`ratio_term`] around its pole `1/c`, evaluated at
/// offset `u`.
fn ratio_term_near_pole(u: f64, pole: f64, a: f64, b: f64, c: f64) -> f64 {
    let x = Jet::<6>::variable(pole);
    let num = (x * a).sinc() * (x * (PI * b)).cos();
    // The numerator vanishes at the pole, so num/u keeps coefficients 1..6.
    let reduced = num.shift_down();
    // (1 − c²(pole+u)²)/u = −2c − c²u
    let den = Jet::<5>::from_coeffs([-2.0 * c, -c * c, 0.0, 0.0, 0.0]);
    (reduced / den).eval(u)
}

fn rc_normalized(x: f64, beta: f64) -> f64 {
    ratio_term(x.abs(), 1.0, beta, 2.0 * beta)
}

fn autocorr_normalized(x: f64, beta: f64) -> f64 {
    let x = x.abs();
    ratio_term(x, 1.0, beta, 2.0 * beta) - 0.25 * beta * ratio_term(x, beta, 1.0, beta)
}

/// Tabulated autocorrelation for inner loops (timing search).
///
/// Catmull–Rom interpolation on a `1/2048`-symbol grid; interpolation error is
/// below 1e-9, and arguments outside the table fall back to the exact
/// formula.
#[derive(Debug, Clone)]
pub struct AutocorrTable {
    inv_step: f64,
    /// Samples of R at x = i·step for i = 0..len, with one extra point on
    /// each side of the usable range.
    values: Vec<f64>,
    limit: f64,
    beta: f64,
    ts: f64,
}

impl AutocorrTable {
    const STEPS_PER_SYMBOL: f64 = 2048.0;

    /// Table covering `|τ| ≤ span` (seconds).
    pub fn new(spec: &PulseSpec, span: f64) -> Self {
        let span_norm = (span / spec.ts).max(1.0);
        let step = 1.0 / Self::STEPS_PER_SYMBOL;
        let n = (span_norm / step).ceil() as usize + 3;
        let values = (0..n)
            .map(|i| autocorr_normalized(i as f64 * step, spec.beta))
            .collect();
        AutocorrTable {
            inv_step: Self::STEPS_PER_SYMBOL,
            values,
            limit: (n - 3) as f64 * step,
            beta: spec.beta,
            ts: spec.ts,
        }
    }

    #[inline]
    pub fn eval(&self, tau: f64) -> f64 {
        let x = (tau / self.ts).abs();
        if x >= self.limit {
            return autocorr_normalized(x, self.beta);
        }
        let pos = x * self.inv_step;
        let i = pos as usize;
        let t = pos - i as f64;
        let v = &self.values;
        // R is even, so R(−step) = R(step).
        let p0 = if i == 0 { v[1] } else { v[i - 1] };
        let (p1, p2, p3) = (v[i], v[i + 1], v[i + 2]);
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = 0.5 * (p2 - p0);
        ((a * t + b) * t + c) * t + p1
    }
}

/// Truncated Taylor series `Σ c_k u^k` about a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet<const N: usize>([f64; N]);

impl<const N: usize> Jet<N> {
    fn from_coeffs(c: [f64; N]) -> Self {
        Jet(c)
    }

    fn variable(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        if N > 1 {
            c[1] = 1.0;
        }
        Jet(c)
    }

    fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    fn sin_cos(self) -> (Self, Self) {
        let f = self.0;
        let mut s = [0.0; N];
        let mut c = [0.0; N];
        (s[0], c[0]) = f[0].sin_cos();
        for k in 1..N {
            let (mut sk, mut ck) = (0.0, 0.0);
            for j in 1..=k {
                let jf = j as f64 * f[j];
                sk += jf * c[k - j];
                ck -= jf * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (Jet(s), Jet(c))
    }

    fn cos(self) -> Self {
        self.sin_cos().1
    }

    /// `sin(πx)/(πx)`; requires a nonzero constant term.
    fn sinc(self) -> Self {
        let px = self * PI;
        px.sin_cos().0 / px
    }
}

impl Jet<6> {
    /// Divides by `u`, discarding the constant term.
    fn shift_down(self) -> Jet<5> {
        let c = self.0;
        Jet([c[1], c[2], c[3], c[4], c[5]])
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.0.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..=k).map(|i| self.0[i] * rhs.0[k - i]).sum();
        }
        Jet(out)
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let mut q = [0.0; N];
        for k in 0..N {
            let acc: f64 = (1..=k).map(|i| rhs.0[i] * q[k - i]).sum();
            q[k] = (self.0[k] - acc) / rhs.0[0];
        }
        Jet(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(beta: f64) -> PulseSpec {
        PulseSpec::new(beta, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(PulseSpec::new(-0.1, 1.0).is_err());
        assert!(PulseSpec::new(1.1, 1.0).is_err());
        assert!(PulseSpec::new(0.2, 0.0).is_err());
        assert!(PulseSpec::new(0.2, f64::NAN).is_err());
    }

    #[test]
    fn rc_peak_and_zero_crossings() {
        let p = spec(0.22);
        assert_eq!(p.rc_pulse(0.0), 1.0);
        assert!(p.rc_pulse(3.0).abs() < 1e-12);
        let isi: f64 = (1..200).map(|k| p.rc_pulse(k as f64).abs() + p.rc_pulse(-(k as f64)).abs()).sum();
        assert!(isi < 1e-10, "isi {isi}");
    }

    #[test]
    fn rc_scales_with_symbol_period() {
        let a = PulseSpec::new(0.3, 1.0).unwrap();
        let b = PulseSpec::new(0.3, 1e-6).unwrap();
        assert_eq!(a.rc_pulse(0.37), b.rc_pulse(0.37e-6));
        assert!(b.rc_pulse(2e-6).abs() < 1e-12);
    }

    #[test]
    fn rc_singularity_matches_epsilon_limit() {
        let p = spec(0.22);
        let ts = 1.0 / (2.0 * 0.22);
        let at = p.rc_pulse(ts);
        // Closed-form limit of the raised cosine at its pole.
        assert!((at - PI / 4.0 * sinc(1.0 / (2.0 * 0.22))).abs() < 1e-14);
        for k in 3..=8 {
            let eps = 10f64.powi(-k);
            let lo = p.rc_pulse(ts - eps);
            let hi = p.rc_pulse(ts + eps);
            // The symmetric mean cancels the first-order term.
            assert!((0.5 * (lo + hi) - at).abs() < 20.0 * eps * eps + 1e-9, "eps {eps}: {lo} {at} {hi}");
            assert!((hi - at).abs() < eps + 1e-12, "eps {eps}");
        }
    }

    #[test]
    fn autocorr_reference_values() {
        assert!((spec(0.22).autocorr(0.0) - 0.945).abs() < 1e-15);
        assert!(spec(0.0).autocorr(1.0).abs() < 1e-16);
        assert_eq!(spec(0.0).autocorr(0.0), 1.0);
    }

    #[test]
    fn second_term_pole_limit() {
        // At τ = 1/β the second term tends to cos(π/β)/2.
        let beta = 0.22;
        let direct = ratio_term(1.0 / beta, beta, 1.0, beta);
        assert!((direct - (PI / beta).cos() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn singular_points_enumeration() {
        assert_eq!(spec(0.25).singular_points(), vec![-4.0, -2.0, 2.0, 4.0]);
        assert!(spec(0.0).singular_points().is_empty());
        let s = spec(0.22).singular_points();
        assert!((s[2] - 2.272_727_272_727_273).abs() < 1e-12);
        assert!((s[3] - 4.545_454_545_454_546).abs() < 1e-12);
        for &x in &s {
            let c = if x.abs() < 3.0 { 2.0 * 0.22 } else { 0.22 };
            assert!((1.0 - (c * x).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn autocorr_is_continuous_at_singular_points() {
        for beta in [0.1, 0.22, 0.25, 0.5, 1.0] {
            let p = spec(beta);
            for x in p.singular_points() {
                let at = p.autocorr(x);
                for d in [1e-9, 5e-7, 2e-6, 1e-4] {
                    let (lo, hi) = (p.autocorr(x - d), p.autocorr(x + d));
                    assert!((0.5 * (lo + hi) - at).abs() < 20.0 * d * d + 1e-9, "β={beta} x={x} d={d}");
                    assert!((hi - at).abs() < 4.0 * d + 1e-12, "β={beta} x={x} d={d}");
                }
            }
        }
    }

    #[test]
    fn double_zero_at_beta_quarter() {
        // β = 1/4: sinc(2) and cos(π/2) both vanish at τ = 2, so the first
        // term's limit is 0.
        let v = ratio_term(2.0, 1.0, 0.25, 0.5);
        assert!(v.abs() < 1e-15, "{v}");
    }

    #[test]
    fn table_matches_exact() {
        let p = spec(0.22);
        let t = AutocorrTable::new(&p, 3.0);
        let mut x = -3.5;
        while x < 3.5 {
            assert!((t.eval(x) - p.autocorr(x)).abs() < 1e-9, "{x}");
            x += 0.000_731;
        }
    }

    #[test]
    fn jet_arithmetic() {
        // exp-free check: (1+u)^2 / (1+u) = 1+u, sin² + cos² = 1
        let x = Jet::<6>::variable(0.7);
        let (s, c) = x.sin_cos();
        let one = s * s + c * c;
        assert!((one.0[0] - 1.0).abs() < 1e-15);
        assert!(one.0[1..].iter().all(|v| v.abs() < 1e-14));
        let q = (x * x) / x;
        assert!((q - x).0.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(Jet::<3>::from_coeffs([2.0, 0.0, 0.0]).eval(5.0), 2.0);
    }
}

//! Independent oracles shared by the integration suites.
//!
//! Waveforms are synthesized here directly from the raised-cosine pulse, one
//! sampling phase at a time, over a periodically repeated maximal-length
//! sequence. Periodic m-sequences have off-peak autocorrelation −1/M, so
//! time averages over one period match ensemble averages up to O(1/M).

#![allow(dead_code)]

use mediumband::{ChannelRealization, PulseSpec};
use num_complex::Complex64;

/// ±1 m-sequence of period `2^degree − 1` from a Fibonacci LFSR.
pub fn prbs(degree: u32) -> Vec<f64> {
    let tap = match degree {
        7 => 6,
        15 => 14,
        17 => 14,
        20 => 3,
        _ => panic!("no primitive trinomial tabulated for degree {degree}"),
    };
    let len = (1usize << degree) - 1;
    let mask = (1u32 << degree) - 1;
    let mut state = 1u32;
    (0..len)
        .map(|_| {
            let bit = ((state >> (degree - 1)) ^ (state >> (tap - 1))) & 1;
            state = ((state << 1) | bit) & mask;
            if bit == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// `out[k] = Σ_j kernel[j + half]·amps[(k − j) mod M]`.
fn circular<T>(amps: &[f64], kernel: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    let m = amps.len();
    let half = kernel.len() / 2;
    assert!(half < m, "kernel longer than the period");
    // ext[j] = amps[(j − half) mod M], so amps[(k − i + half) mod M] = ext[k + 2·half − i].
    let ext: Vec<f64> = (0..m + 2 * half).map(|j| amps[(j + m - half) % m]).collect();
    (0..m)
        .map(|k| {
            let window = &ext[k..k + 2 * half + 1];
            let mut acc = T::default();
            for (&c, &a) in kernel.iter().zip(window.iter().rev()) {
                acc += c * a;
            }
            acc
        })
        .collect()
}

/// `s(offset + kT_s)` for `k = 0..M`, with `s(t) = Σ_m a_m g(t − mT_s)`.
pub fn transmit_phase(amps: &[f64], spec: &PulseSpec, offset: f64, guard: usize) -> Vec<f64> {
    let g = guard as isize;
    let kernel: Vec<f64> = (-g..=g).map(|j| spec.rc_pulse(offset + j as f64 * spec.ts)).collect();
    circular(amps, &kernel)
}

/// `r(offset + kT_s)` for `k = 0..M`, with
/// `r(t) = Σ_n γ_n Σ_m a_m g(t − τ_n − mT_s)`.
pub fn receive_phase(amps: &[f64], ch: &ChannelRealization, spec: &PulseSpec, offset: f64, guard: usize) -> Vec<Complex64> {
    let g = guard as isize;
    let kernel: Vec<Complex64> = (-g..=g)
        .map(|j| {
            let t = offset + j as f64 * spec.ts;
            let mut acc = Complex64::new(0.0, 0.0);
            for (d, gamma) in ch.delays().iter().zip(ch.complex_gains()) {
                acc += gamma * spec.rc_pulse(t - d);
            }
            acc
        })
        .collect();
    circular(amps, &kernel)
}

/// Time average of `s(t)s(t + τ)` over `phases` equispaced sampling phases
/// and one period of `amps`.
pub fn empirical_autocorr(amps: &[f64], spec: &PulseSpec, tau: f64, phases: usize, guard: usize) -> f64 {
    let mut acc = 0.0;
    for p in 0..phases {
        let off = p as f64 * spec.ts / phases as f64;
        let a = transmit_phase(amps, spec, off, guard);
        let b = transmit_phase(amps, spec, off + tau, guard);
        acc += a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
    }
    acc / (phases * amps.len()) as f64
}

/// Projections of the received waveform onto delayed copies of the
/// transmitted one, over all sampling phases.
#[derive(Debug, Clone, Copy)]
pub struct Regression {
    /// `⟨r(t), s(t − τ̂ − vT_s)⟩ / ⟨s, s⟩` for `v = 0, 1, 2`.
    pub taps: [Complex64; 3],
    /// Mean `|r(t) − taps[0]·s(t − τ̂)|²`.
    pub residual_power: f64,
    /// Mean `|r(t)|²`.
    pub received_power: f64,
}

pub fn waveform_regression(
    amps: &[f64],
    ch: &ChannelRealization,
    spec: &PulseSpec,
    tau_hat: f64,
    phases: usize,
    guard: usize,
) -> Regression {
    let m = amps.len();
    let mut cross = [Complex64::new(0.0, 0.0); 3];
    let (mut ss, mut rr) = (0.0, 0.0);
    for p in 0..phases {
        let off = p as f64 * spec.ts / phases as f64;
        let s = transmit_phase(amps, spec, off, guard);
        let r = receive_phase(amps, ch, spec, tau_hat + off, guard);
        for k in 0..m {
            ss += s[k] * s[k];
            rr += r[k].norm_sqr();
            for (v, c) in cross.iter_mut().enumerate() {
                *c += r[k] * s[(k + m - v) % m];
            }
        }
    }
    let taps = cross.map(|c| c / ss);
    let n = (phases * m) as f64;
    Regression {
        taps,
        residual_power: (rr - taps[0].norm_sqr() * ss) / n,
        received_power: rr / n,
    }
}

/// Kolmogorov–Smirnov distance between `sorted` samples and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF tabulated by cumulative quadrature of `pdf` on `[lo, hi]`, linearly
/// interpolated between nodes.
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new<F: Fn(f64) -> f64>(pdf: F, lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..cells {
            let a = lo + i as f64 * step;
            acc += mediumband::quadrature::integrate(&pdf, a, a + step, 1e-15, 20).value;
            values.push(acc);
        }
        TabulatedCdf { lo, step, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Every tolerance below is fixed; none is
//! tuned to the observed values.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{empirical_autocorr, ks_distance, prbs, waveform_regression, TabulatedCdf};
use mediumband::ber::{
    asymptote_coefficient, db_to_linear, local_slope, lower_bound, q_function, rayleigh_ber, series_coefficients,
};
use mediumband::experiments::{fading_population, grid_slopes};
use mediumband::fading_stats::{fit, FitReport, TABLE1};
use mediumband::link::{run_ber, run_ber_paired, CALIBRATION_REALIZATIONS};
use mediumband::{BimodalParams, Calibration, Detector, LinkScenario, ModulationParams, PulseSpec, StopRule};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const BPSK: ModulationParams = ModulationParams::BPSK;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("    [{}] {line}", if ok { "ok" } else { "FAIL" }));
    }
}

/// Results computed once and shared between criteria.
#[derive(Default)]
struct Shared {
    /// Fit on the 60% delay-spread population (same profile and seed as Scenario 2).
    fit_pds60: Option<FitReport>,
    /// `(1−β/4)E|h_o|² + E η_o²` and sample count for Scenario 2.
    power_scenario2: Option<(f64, usize)>,
}

fn criterion1() -> Outcome {
    let mut o = Outcome::new();
    let p = BimodalParams::new(0.0, 0.5f64.sqrt(), 0.0).unwrap();
    for snr in [0.1, 1.0, 10.0, 1e2, 1e3, 1e4] {
        let lb = lower_bound(snr, &p, &BPSK);
        let ray = rayleigh_ber(snr);
        let d = (lb - ray).abs();
        o.check(d < 1e-9, format!("γ̄={snr:e}: bound {lb:.12e}, closed form {ray:.12e}, |Δ|={d:.1e} (< 1e-9)"));
    }
    o
}

fn criterion2() -> Outcome {
    let mut o = Outcome::new();
    let scenario = LinkScenario::preset("narrowband").unwrap();
    let grid = [0.0, 5.0, 10.0, 15.0];
    let closed = rayleigh_ber(1.0);
    o.check((closed - 0.1464).abs() < 5e-5, format!("closed form at 0 dB = {closed:.6}"));
    let points = run_ber(&scenario, &grid, StopRule::default()).unwrap();
    for p in points {
        let expected = rayleigh_ber(p.snr);
        let ok = p.bit_errors >= 200 && (p.ber - expected).abs() <= p.ci_halfwidth;
        o.check(
            ok,
            format!(
                "{:>4} dB: BER {:.5e} ± {:.2e} ({} errors / {} bits), closed form {:.5e}",
                p.snr_db, p.ber, p.ci_halfwidth, p.bit_errors, p.bits, expected
            ),
        );
    }
    o
}

fn criterion3() -> Outcome {
    let mut o = Outcome::new();
    let p = BimodalParams::new(0.0, 0.5f64.sqrt(), 0.0).unwrap();
    let c = series_coefficients(&p, &BPSK);
    let target = [0.25, 0.1875, 0.15625];
    for (name, got, want) in [("Γ1", c.gamma1, target[0]), ("Γ2", c.gamma2, target[1]), ("Γ3", c.gamma3, target[2])] {
        let d = (got.abs() - want).abs();
        o.check(d < 1e-12, format!("|{name}| = {:.15} vs {want} (|Δ|={d:.1e}, < 1e-12)", got.abs()));
    }
    o
}

fn criterion4() -> Outcome {
    let mut o = Outcome::new();
    for (pds, ..) in TABLE1.iter().filter(|r| r.0 > 0) {
        let p = BimodalParams::table1(*pds).unwrap();
        let a = asymptote_coefficient(&p, &BPSK);
        let g1 = series_coefficients(&p, &BPSK).gamma1;
        let d = (a - g1).abs();
        o.check(d <= 1e-14, format!("PDS {pds}: asymptote coefficient {a:.16e}, Γ1 {g1:.16e}, |Δ|={d:.1e}"));
    }
    o
}

fn criterion5(shared: &mut Shared) -> Outcome {
    let mut o = Outcome::new();
    let samples = 1_000_000;
    let mut ks = Vec::new();
    for &(pds, k_ref, _, so2_ref) in TABLE1.iter().filter(|r| r.0 > 0) {
        let scenario = LinkScenario::preset(&format!("table1-pds-{pds}")).unwrap();
        let pop = fading_population(&scenario, samples).unwrap();
        let h: Vec<Complex64> = pop.iter().map(|s| s.h_o).collect();
        let report = fit(&h).unwrap();
        let k = report.params.k();
        let so2 = report.params.sigma_o().powi(2);
        let si2 = report.params.sigma_i().powi(2);
        o.check(
            (k - k_ref).abs() <= 0.1,
            format!("PDS {pds}: fitted K {k:.4} vs {k_ref} (±0.1)  [σ_I² {si2:.5}, {} samples]", h.len()),
        );
        o.check(
            (so2 / so2_ref - 1.0).abs() <= 0.15,
            format!("PDS {pds}: fitted σ_O² {so2:.4} vs {so2_ref} (±15%)"),
        );
        ks.push(k);
        if pds == 60 {
            let sp = scenario.pulse.signal_power();
            let n = pop.len() as f64;
            let total = pop.iter().map(|s| sp * s.h_o.norm_sqr() + s.eta_o * s.eta_o).sum::<f64>() / n;
            shared.power_scenario2 = Some((total, pop.len()));
            shared.fit_pds60 = Some(report);
        }
    }
    let increasing = ks.windows(2).all(|w| w[1] > w[0]);
    o.check(increasing, format!("fitted K strictly increasing in PDS: {ks:.4?}"));
    o
}

fn criterion6(shared: &Shared) -> Outcome {
    let mut o = Outcome::new();
    let s1 = LinkScenario::preset("scenario1").unwrap();
    let sp = s1.pulse.signal_power();
    let pop = fading_population(&s1, 1_000_000).unwrap();
    let n = pop.len() as f64;
    let total1 = pop.iter().map(|s| sp * s.h_o.norm_sqr() + s.eta_o * s.eta_o).sum::<f64>() / n;
    let (total2, n2) = shared.power_scenario2.unwrap_or_else(|| {
        let s2 = LinkScenario::preset("scenario2").unwrap();
        let pop = fading_population(&s2, 1_000_000).unwrap();
        let t = pop.iter().map(|s| sp * s.h_o.norm_sqr() + s.eta_o * s.eta_o).sum::<f64>() / pop.len() as f64;
        (t, pop.len())
    });
    for (name, total, count) in [("scenario1", total1, pop.len()), ("scenario2", total2, n2)] {
        let rel = total / sp - 1.0;
        o.check(
            rel.abs() < 0.01,
            format!("{name}: (1−β/4)E|h_o|² + Eη_o² = {total:.5} vs {sp:.5} ({:+.3}%, {count} realizations)", 100.0 * rel),
        );
    }
    o
}

fn criterion7(shared: &Shared) -> Outcome {
    let mut o = Outcome::new();
    let scenario = LinkScenario::preset("scenario2").unwrap();
    let params = match &shared.fit_pds60 {
        Some(r) => r.params,
        None => {
            let pop = fading_population(&scenario, 1_000_000).unwrap();
            fit(&pop.iter().map(|s| s.h_o).collect::<Vec<_>>()).unwrap().params
        }
    };
    o.lines.push(format!(
        "    fitted parameters: K {:.4}, σ_I² {:.5}, σ_O² {:.4}",
        params.k(),
        params.sigma_i().powi(2),
        params.sigma_o().powi(2)
    ));
    let cal = Calibration::estimate(&scenario, CALIBRATION_REALIZATIONS).unwrap();
    let rows = run_ber_paired(&scenario, &cal, &[5.0, 10.0, 15.0], StopRule::default(), &Detector::ALL).unwrap();
    for row in rows {
        let (m1, m2) = (&row[0], &row[1]);
        let lb = lower_bound(m1.snr, &params, &BPSK);
        for p in [m1, m2] {
            o.check(
                p.bit_errors >= 200 && lb <= p.ber + p.ci_halfwidth,
                format!(
                    "{:>4} dB {}: bound {:.4e} ≤ BER {:.4e} + {:.2e} ({} errors)",
                    p.snr_db,
                    p.detector.as_str(),
                    lb,
                    p.ber,
                    p.ci_halfwidth,
                    p.bit_errors
                ),
            );
        }
        o.check(
            m2.ber <= m1.ber,
            format!("{:>4} dB: method2 {:.4e} ≤ method1 {:.4e} on the same frames", m1.snr_db, m2.ber, m1.ber),
        );
    }
    o
}

fn criterion8() -> Outcome {
    let mut o = Outcome::new();
    let grid: Vec<f64> = (0..=60).map(|i| 10.0 + 0.5 * i as f64).collect();
    for (pds, need) in [(20u32, 1.8), (60, 2.5)] {
        let p = BimodalParams::table1(pds).unwrap();
        let values: Vec<f64> = grid.iter().map(|&db| lower_bound(db_to_linear(db), &p, &BPSK)).collect();
        let slopes = grid_slopes(&grid, &values);
        let (at, peak) = grid
            .iter()
            .zip(&slopes)
            .filter(|(_, s)| s.is_finite())
            .fold((f64::NAN, 0.0f64), |best, (&db, &s)| if s.abs() > best.1 { (db, s.abs()) } else { best });
        o.check(
            peak >= need,
            format!("PDS {pds}: max local slope over 10–40 dB = {peak:.3} at {at} dB (need ≥ {need})"),
        );
        let tail = local_slope(|g| lower_bound(g, &p, &BPSK), 100.0, 0.5).abs();
        o.check((tail - 1.0).abs() < 0.05, format!("PDS {pds}: local slope at γ̄ = 1e10 is {tail:.4} (→ 1, ±0.05)"));
    }
    o
}

fn criterion9() -> Outcome {
    let mut o = Outcome::new();
    let spec = PulseSpec::new(0.22, 1.0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);

    // Autocorrelation against the time average of a periodic m-sequence waveform.
    let amps = prbs(15);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let tau = rng.random_range(-5.0..5.0);
        let emp = empirical_autocorr(&amps, &spec, tau, 16, 24);
        worst = worst.max((emp - spec.autocorr(tau)).abs());
    }
    o.check(worst < 2e-3, format!("autocorr vs time average, 50 random τ: max |Δ| = {worst:.2e} (< 2e-3)"));

    // Fading quantities against waveform regression.
    let scenario = LinkScenario::preset("scenario2").unwrap();
    let sync = scenario.synchronizer().unwrap();
    let amps = prbs(17);
    let (mut dh, mut deta, mut dtap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..5 {
        let ch = scenario.profile.sample_realization(&mut rng);
        let tau = sync.synchronize(&ch);
        let taps = ch.fading_taps(tau, &spec);
        let eta2 = ch.fading_eta(tau, &spec).unwrap().powi(2);
        let reg = waveform_regression(&amps, &ch, &spec, tau, 64, 16);
        dh = dh.max((ch.fading_h(tau, &spec) - reg.taps[0]).norm());
        deta = deta.max((reg.residual_power - eta2).abs() / eta2);
        for v in 0..3 {
            dtap = dtap.max((taps[v] - reg.taps[v]).norm());
        }
    }
    o.check(dh < 1e-3, format!("h_o vs regression, 5 realizations: max |Δ| = {dh:.2e} (< 1e-3)"));
    o.check(deta < 0.02, format!("η_o² vs residual power: max relative Δ = {:.3}% (< 2%)", 100.0 * deta));
    o.check(dtap < 1e-2, format!("taps vs regression: max |Δ| = {dtap:.2e} (< 1e-2)"));

    // Sampler against the density integrated by quadrature.
    let p = BimodalParams::table1(40).unwrap();
    let width = 12.0 * p.lambda0();
    let cdf = TabulatedCdf::new(|x| p.pdf_marginal(x), -width, width, 24_000);
    let mut draws: Vec<f64> = (0..1_000_000).map(|_| p.sample_component(&mut rng)).collect();
    draws.sort_by(f64::total_cmp);
    let d = ks_distance(&draws, |x| cdf.eval(x));
    o.check(d < 0.002, format!("sample() vs integrated density, 10⁶ draws: KS = {d:.2e} (< 0.002)"));
    let dc = [-1.0, -0.3, -0.05, 0.0, 0.1, 0.5, 1.2]
        .iter()
        .map(|&x| (cdf.eval(x) - p.cdf_marginal(x)).abs())
        .fold(0.0, f64::max);
    o.check(dc < 1e-6, format!("closed-form CDF vs integrated density: max |Δ| = {dc:.1e}"));

    // Bound against a Monte Carlo average of the conditional error probability.
    let p = BimodalParams::table1(60).unwrap();
    let snr = 100.0;
    let n = 10_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let h = p.sample(&mut rng);
        let q = BPSK.rho1 * q_function((BPSK.rho2 * snr * h.norm_sqr()).sqrt());
        sum += q;
        sum_sq += q * q;
    }
    let mean = sum / n as f64;
    let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    let lb = lower_bound(snr, &p, &BPSK);
    o.check(
        (mean - lb).abs() < 3.0 * se,
        format!("lower bound {lb:.5e} vs sampled {mean:.5e} ± {se:.1e} (10⁷ draws, within 3 SE)"),
    );
    o
}

fn main() -> ExitCode {
    let mut shared = Shared::default();
    let titles = [
        "Rayleigh reduction identity",
        "narrowband end-to-end BER",
        "narrowband series coefficients",
        "asymptote equals first series term",
        "reference fading parameters",
        "power conservation",
        "bound consistency, Scenario 2",
        "diversity slope",
        "oracle equivalences",
    ];
    let mut failed = 0;
    for (i, title) in titles.iter().enumerate() {
        let start = Instant::now();
        let outcome = match i + 1 {
            1 => criterion1(),
            2 => criterion2(),
            3 => criterion3(),
            4 => criterion4(),
            5 => criterion5(&mut shared),
            6 => criterion6(&shared),
            7 => criterion7(&shared),
            8 => criterion8(),
            _ => criterion9(),
        };
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict}: {title} ({:.1} s)", i + 1, start.elapsed().as_secs_f64());
        for l in &outcome.lines {
            println!("{l}");
        }
        failed += !outcome.pass as usize;
    }
    println!("acceptance: {} of {} criteria passed", titles.len() - failed, titles.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

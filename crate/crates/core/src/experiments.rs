//! Sweeps and tabular outputs behind the command-line tool.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ber::{self, ModulationParams};
use crate::channel::FadingPoint;
use crate::error::{Error, Result};
use crate::fading_stats::{self, BimodalParams, FitReport, Histogram};
use crate::link::{self, db_to_linear, Calibration, Detector, StopRule};
use crate::rng::{stream, Purpose};
use crate::scenario::LinkScenario;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fading quantities of one channel draw at the receiver's timing instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FadingSample {
    pub h_o: Complex64,
    pub eta_o: f64,
    pub g_o: Complex64,
    pub tau_hat: f64,
}

/// `count` independent realizations of the scenario's channel, each
/// synchronized with the scenario's rule.
pub fn fading_population(scenario: &LinkScenario, count: usize) -> Result<Vec<FadingSample>> {
    scenario.validate()?;
    let sync = scenario.synchronizer()?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(scenario.seed, Purpose::FadingPopulation, i);
            let ch = scenario.profile.sample_realization(&mut rng);
            let tau = sync.synchronize(&ch);
            let fp = FadingPoint::compute(&ch, tau, &scenario.pulse)?;
            Ok(FadingSample {
                h_o: fp.h_o,
                eta_o: fp.eta_o,
                g_o: ch.narrowband_g(),
                tau_hat: tau,
            })
        })
        .collect()
}

/// Inclusive grid `start, start + step, …` up to `stop`. Empty when
/// `start > stop`.
pub fn snr_grid(start_db: f64, stop_db: f64, step_db: f64) -> Result<Vec<f64>> {
    if !(step_db > 0.0) || !start_db.is_finite() || !stop_db.is_finite() {
        return Err(Error::invalid("SNR grid needs finite bounds and a positive step"));
    }
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let v = start_db + i as f64 * step_db;
        if v > stop_db + 1e-9 * step_db {
            break;
        }
        out.push(v);
        i += 1;
    }
    Ok(out)
}

/// Where the bimodal parameters for analytic curves come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamsSource {
    /// Tabulated row for a PDS.
    Table1(u32),
    /// `(K, σ_I², σ_O²)` given directly.
    Explicit { k: f64, sigma_i2: f64, sigma_o2: f64 },
    /// JSON file holding a fit report, a `pdf` sidecar, or bare parameters.
    File(String),
    /// Fit to a freshly simulated population of the scenario.
    Fit { samples: usize },
}

impl std::str::FromStr for ParamsSource {
    type Err = Error;
    /// `table1:<pds>`, `k=<K>,sigma_i2=<σ_I²>,sigma_o2=<σ_O²>`,
    /// `fit:<samples>` or a path.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("table1:") {
            return p
                .parse()
                .map(ParamsSource::Table1)
                .map_err(|_| Error::Parse(format!("bad PDS in '{s}'")));
        }
        if let Some(n) = s.strip_prefix("fit:") {
            return n
                .parse()
                .map(|samples| ParamsSource::Fit { samples })
                .map_err(|_| Error::Parse(format!("bad sample count in '{s}'")));
        }
        if s.contains('=') {
            let (mut k, mut si, mut so) = (None, None, None);
            for part in s.split(',') {
                let (key, val) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad parameter '{part}'")))?;
                let v: f64 = val
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number in '{part}'")))?;
                match key.trim() {
                    "k" => k = Some(v),
                    "sigma_i2" => si = Some(v),
                    "sigma_o2" => so = Some(v),
                    other => return Err(Error::Parse(format!("unknown parameter '{other}'"))),
                }
            }
            return match (k, si, so) {
                (Some(k), Some(sigma_i2), Some(sigma_o2)) => Ok(ParamsSource::Explicit { k, sigma_i2, sigma_o2 }),
                _ => Err(Error::Parse("explicit parameters need k, sigma_i2 and sigma_o2".into())),
            };
        }
        Ok(ParamsSource::File(s.to_string()))
    }
}

impl ParamsSource {
    pub fn describe(&self) -> String {
        match self {
            ParamsSource::Table1(p) => format!("table1:{p}"),
            ParamsSource::Explicit { k, sigma_i2, sigma_o2 } => {
                format!("k={k},sigma_i2={sigma_i2},sigma_o2={sigma_o2}")
            }
            ParamsSource::File(p) => format!("file:{p}"),
            ParamsSource::Fit { samples } => format!("fit:{samples}"),
        }
    }

    /// Resolves to parameters; `scenario` is only used by [`ParamsSource::Fit`].
    pub fn resolve(&self, scenario: Option<&LinkScenario>) -> Result<(BimodalParams, Option<FitReport>)> {
        match self {
            ParamsSource::Table1(p) => BimodalParams::table1(*p)
                .map(|b| (b, None))
                .ok_or_else(|| Error::invalid(format!("no tabulated row for PDS {p}"))),
            ParamsSource::Explicit { k, sigma_i2, sigma_o2 } => {
                Ok((BimodalParams::from_variances(*k, *sigma_i2, *sigma_o2)?, None))
            }
            ParamsSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let v: Value = serde_json::from_str(&text)?;
                let p = v
                    .pointer("/fit/params")
                    .or_else(|| v.get("params"))
                    .unwrap_or(&v)
                    .clone();
                Ok((serde_json::from_value(p)?, None))
            }
            ParamsSource::Fit { samples } => {
                let s = scenario.ok_or_else(|| Error::invalid("fitting needs a scenario"))?;
                let pop = fading_population(s, *samples)?;
                let h: Vec<Complex64> = pop.iter().map(|f| f.h_o).collect();
                let report = fading_stats::fit(&h)?;
                Ok((report.params, Some(report)))
            }
        }
    }
}

/// Output table with `#`-prefixed metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|&v| fmt_value(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let meta: serde_json::Map<String, Value> =
            self.metadata.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|&v| if v.is_finite() { json!(v) } else { Value::Null }).collect()))
            .collect();
        json!({ "metadata": meta, "columns": self.columns, "rows": rows })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Csv => self.to_csv(),
            Format::Json => serde_json::to_string_pretty(&self.to_json())? + "\n",
        })
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn scenario_metadata(t: &mut Table, s: &LinkScenario) {
    t.meta("version", VERSION);
    for line in s.to_kv().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            t.meta(&format!("scenario.{k}"), v);
        }
    }
    t.meta("pds_percent", s.pds());
}

fn params_metadata(t: &mut Table, p: &BimodalParams, source: &str) {
    t.meta("params.source", source);
    t.meta("params.k", p.k());
    t.meta("params.sigma_i2", p.sigma_i().powi(2));
    t.meta("params.sigma_o2", p.sigma_o().powi(2));
}

/// Log-log slope `−d log10 P / d log10 γ̄` by differences on the grid;
/// one-sided at the ends, NaN for a single point.
pub fn grid_slopes(snr_db: &[f64], values: &[f64]) -> Vec<f64> {
    let n = snr_db.len();
    let logs: Vec<f64> = values.iter().map(|v| v.log10()).collect();
    (0..n)
        .map(|i| {
            if n < 2 {
                return f64::NAN;
            }
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            -(logs[b] - logs[a]) / ((snr_db[b] - snr_db[a]) / 10.0)
        })
        .collect()
}

/// Lower bound, asymptote, three-term series and Rayleigh baseline over the
/// grid.
pub fn bound_table(params: &BimodalParams, source: &str, snr_db: &[f64]) -> Table {
    let m = ModulationParams::BPSK;
    let series = ber::series_coefficients(params, &m);
    let mut t = Table::new(&["snr_db", "snr", "lower_bound", "asymptote", "series", "rayleigh", "local_slope"]);
    t.meta("version", VERSION);
    t.meta("command", "bound");
    params_metadata(&mut t, params, source);
    t.meta("series.gamma1", series.gamma1);
    t.meta("series.gamma2", series.gamma2);
    t.meta("series.gamma3", series.gamma3);
    let lb: Vec<f64> = snr_db.iter().map(|&d| ber::lower_bound(db_to_linear(d), params, &m)).collect();
    let slopes = grid_slopes(snr_db, &lb);
    for (i, &d) in snr_db.iter().enumerate() {
        let g = db_to_linear(d);
        t.rows.push(vec![
            d,
            g,
            lb[i],
            ber::asymptote(g, params, &m),
            ber::series_eval(g, &series),
            ber::rayleigh_ber(g),
            slopes[i],
        ]);
    }
    t
}

#[derive(Debug, Clone)]
pub struct BerSweep {
    pub snr_db: Vec<f64>,
    pub stop: StopRule,
    pub detectors: Vec<Detector>,
    pub params: ParamsSource,
    pub calibration_realizations: u64,
}

/// Simulated BER per detector alongside the analytic curves.
pub fn ber_table(scenario: &LinkScenario, sweep: &BerSweep) -> Result<Table> {
    scenario.validate()?;
    let (params, fit) = sweep.params.resolve(Some(scenario))?;
    let calibration = Calibration::estimate(scenario, sweep.calibration_realizations)?;
    let rows = link::run_ber_paired(scenario, &calibration, &sweep.snr_db, sweep.stop, &sweep.detectors)?;

    let mut cols: Vec<String> = vec!["snr_db".into(), "snr".into()];
    for d in &sweep.detectors {
        for c in ["ber", "errors", "bits", "ci", "ci_binomial", "measured_snr"] {
            cols.push(format!("{}_{c}", d.as_str()));
        }
    }
    for c in ["lower_bound", "asymptote", "series", "rayleigh"] {
        cols.push(c.into());
    }
    let mut t = Table {
        metadata: Vec::new(),
        columns: cols,
        rows: Vec::new(),
    };
    t.meta("command", "ber");
    scenario_metadata(&mut t, scenario);
    t.meta("stop.min_errors", sweep.stop.min_errors);
    t.meta("stop.max_bits", sweep.stop.max_bits);
    t.meta("calibration.rx_power", calibration.rx_power);
    t.meta("calibration.realizations", calibration.realizations);
    t.meta("ci", "95% half-width over frames; ci_binomial treats bits as independent");
    params_metadata(&mut t, &params, &sweep.params.describe());
    if let Some(f) = &fit {
        t.meta("params.fit_nll", f.nll);
        t.meta("params.fit_samples", f.sample_count);
    }
    let m = ModulationParams::BPSK;
    let series = ber::series_coefficients(&params, &m);
    for (row, &d) in rows.iter().zip(&sweep.snr_db) {
        let g = db_to_linear(d);
        let mut v = vec![d, g];
        for p in row {
            let ci = if p.one_sided { f64::NAN } else { p.ci_halfwidth };
            v.extend([p.ber, p.bit_errors as f64, p.bits as f64, ci, p.ci_binomial, p.measured_snr]);
        }
        v.extend([
            ber::lower_bound(g, &params, &m),
            ber::asymptote(g, &params, &m),
            ber::series_eval(g, &series),
            ber::rayleigh_ber(g),
        ]);
        t.rows.push(v);
    }
    Ok(t)
}

/// Histogram of the pooled real and imaginary parts of `h_o` and `g_o`, and
/// the bimodal fit of the `h_o` population.
#[derive(Debug, Clone)]
pub struct PdfResult {
    pub table: Table,
    pub fit: FitReport,
    pub sidecar: Value,
}

pub fn pdf_study(scenario: &LinkScenario, samples: usize, bins: usize) -> Result<PdfResult> {
    if samples < fading_stats::MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {} samples",
            fading_stats::MIN_FIT_SAMPLES
        )));
    }
    let pop = fading_population(scenario, samples)?;
    let h: Vec<Complex64> = pop.iter().map(|f| f.h_o).collect();
    let fit = fading_stats::fit(&h)?;
    let table1 = BimodalParams::table1(scenario.pds().round() as u32)
        .filter(|_| (scenario.pds() - scenario.pds().round()).abs() < 1e-9 && scenario.profile.kappa == 0.0);
    let gauss = BimodalParams::gaussian(0.5)?;

    let span = 4.0 * fit.params.sigma_o().max(0.5f64.sqrt());
    let pooled = |v: &[Complex64]| v.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<f64>>();
    let g: Vec<Complex64> = pop.iter().map(|f| f.g_o).collect();
    let hh = Histogram::new(pooled(&h), -span, span, bins)?;
    let gh = Histogram::new(pooled(&g), -span, span, bins)?;

    let mut t = Table::new(&[
        "bin_lo",
        "bin_hi",
        "x",
        "h_density",
        "g_density",
        "fitted_pdf",
        "table1_pdf",
        "gaussian_pdf",
    ]);
    t.meta("command", "pdf");
    scenario_metadata(&mut t, scenario);
    t.meta("samples", samples);
    t.meta("fit.k", fit.params.k());
    t.meta("fit.sigma_i2", fit.params.sigma_i().powi(2));
    t.meta("fit.sigma_o2", fit.params.sigma_o().powi(2));
    t.meta("fit.nll", fit.nll);
    for i in 0..bins {
        let (lo, hi) = (hh.edges[i], hh.edges[i + 1]);
        let x = 0.5 * (lo + hi);
        t.rows.push(vec![
            lo,
            hi,
            x,
            hh.density[i],
            gh.density[i],
            fit.params.pdf_marginal(x),
            table1.map_or(f64::NAN, |p| p.pdf_marginal(x)),
            gauss.pdf_marginal(x),
        ]);
    }

    let n = pop.len() as f64;
    let mean_h2 = pop.iter().map(|f| f.h_o.norm_sqr()).sum::<f64>() / n;
    let mean_eta2 = pop.iter().map(|f| f.eta_o * f.eta_o).sum::<f64>() / n;
    let row = |p: &BimodalParams| json!({"k": p.k(), "sigma_i2": p.sigma_i().powi(2), "sigma_o2": p.sigma_o().powi(2)});
    let sidecar = json!({
        "version": VERSION,
        "scenario": scenario,
        "fit": fit,
        "fitted": row(&fit.params),
        "table1": table1.as_ref().map(row),
        "mean_h_power": mean_h2,
        "mean_eta_power": mean_eta2,
    });
    Ok(PdfResult { table: t, fit, sidecar })
}

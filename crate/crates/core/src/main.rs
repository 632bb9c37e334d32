use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mediumband::experiments::{self, BerSweep, Format, ParamsSource};
use mediumband::link::CALIBRATION_REALIZATIONS;
use mediumband::scenario::{LinkScenario, PRESET_NAMES};
use mediumband::{Detector, Error, Result, StopRule, SyncRule};

#[derive(Parser, Debug)]
#[command(name = "mediumband", version, about = "Mediumband channel BER and fading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate Method-1/Method-2 BER next to the analytic curves.
    Ber(BerArgs),
    /// Simulate h_o and g_o populations, histogram them and fit the bimodal density.
    Pdf(PdfArgs),
    /// Tabulate the lower bound, asymptote, series and Rayleigh baseline.
    Bound(BoundArgs),
    /// List or print scenario presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    List,
    /// Print a preset in scenario-file form.
    Show { name: String },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Preset name (see `preset list`).
    #[arg(long, default_value = "scenario2", conflicts_with = "scenario")]
    preset: String,
    /// Scenario file in `key = value` form.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    sync_rule: Option<SyncArg>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<LinkScenario> {
        let mut s = match &self.scenario {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                LinkScenario::from_kv(&text)?
            }
            None => LinkScenario::preset(&self.preset)?,
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(r) = self.sync_rule {
            s.sync_rule = r.into();
        }
        Ok(s)
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    snr_start_db: f64,
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    snr_stop_db: f64,
    #[arg(long, default_value_t = 5.0)]
    snr_step_db: f64,
}

#[derive(Args, Debug)]
struct BerArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 200)]
    min_errors: u64,
    #[arg(long, default_value_t = 100_000_000)]
    max_bits: u64,
    /// Detector(s) to simulate; both run on the same frames.
    #[arg(long, value_enum, default_value = "both")]
    detector: DetectorArg,
    /// Bimodal parameters for the analytic columns: `table1:<pds>`,
    /// `k=..,sigma_i2=..,sigma_o2=..`, `fit:<samples>` or a JSON file.
    /// Defaults to a fit on `--samples` simulated realizations.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = CALIBRATION_REALIZATIONS)]
    calibration: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PdfArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    bins: usize,
    /// The fit report goes to `<out stem>.fit.json` next to the histogram.
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// `table1:<pds>`, `k=..,sigma_i2=..,sigma_o2=..` or a JSON file.
    #[arg(long, default_value = "table1:60")]
    params: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    snr_start_db: f64,
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    snr_stop_db: f64,
    #[arg(long, default_value_t = 1.0)]
    snr_step_db: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SyncArg {
    MaxH,
    EarliestPath,
}

impl From<SyncArg> for SyncRule {
    fn from(a: SyncArg) -> Self {
        match a {
            SyncArg::MaxH => SyncRule::MaxH,
            SyncArg::EarliestPath => SyncRule::EarliestPath,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DetectorArg {
    Method1,
    Method2,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ber(a) => {
            let mut scenario = a.scenario.load()?;
            let detectors = match a.detector {
                DetectorArg::Method1 => vec![Detector::Method1],
                DetectorArg::Method2 => vec![Detector::Method2],
                DetectorArg::Both => Detector::ALL.to_vec(),
            };
            scenario.detector = detectors[0];
            let params = match &a.params {
                Some(p) => p.parse()?,
                None => ParamsSource::Fit { samples: a.samples },
            };
            let sweep = BerSweep {
                snr_db: experiments::snr_grid(a.grid.snr_start_db, a.grid.snr_stop_db, a.grid.snr_step_db)?,
                stop: StopRule {
                    min_errors: a.min_errors,
                    max_bits: a.max_bits,
                },
                detectors,
                params,
                calibration_realizations: a.calibration,
            };
            let table = experiments::ber_table(&scenario, &sweep)?;
            experiments::emit(&table.render(a.output.format.into())?, a.output.out.as_deref())
        }
        Command::Pdf(a) => {
            let scenario = a.scenario.load()?;
            let res = experiments::pdf_study(&scenario, a.samples, a.bins)?;
            let format: Format = a.output.format.into();
            let sidecar = serde_json::to_string_pretty(&res.sidecar)? + "\n";
            match format {
                Format::Csv => {
                    experiments::emit(&res.table.to_csv(), a.output.out.as_deref())?;
                    match &a.output.out {
                        Some(p) => experiments::emit(&sidecar, Some(&p.with_extension("fit.json"))),
                        None => {
                            eprint!("{sidecar}");
                            Ok(())
                        }
                    }
                }
                Format::Json => {
                    let mut v = res.table.to_json();
                    v["fit"] = res.sidecar;
                    experiments::emit(&(serde_json::to_string_pretty(&v)? + "\n"), a.output.out.as_deref())
                }
            }
        }
        Command::Bound(a) => {
            let source: ParamsSource = a.params.parse()?;
            if matches!(source, ParamsSource::Fit { .. }) {
                return Err(Error::Parse("bound takes a table row, explicit values or a file".into()));
            }
            let (params, _) = source.resolve(None)?;
            let grid = experiments::snr_grid(a.snr_start_db, a.snr_stop_db, a.snr_step_db)?;
            let table = experiments::bound_table(&params, &source.describe(), &grid);
            experiments::emit(&table.render(a.output.format.into())?, a.output.out.as_deref())
        }
        Command::Preset { action } => match action {
            PresetAction::List => experiments::emit(&(PRESET_NAMES.join("\n") + "\n"), None),
            PresetAction::Show { name } => experiments::emit(&LinkScenario::preset(&name)?.to_kv(), None),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

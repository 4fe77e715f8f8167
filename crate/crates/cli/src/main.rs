//! `svir`: run SVIR control scenarios, parameter sweeps and calibrations.
//!
//! Exit codes: 0 success, 2 invalid configuration or data, 3 numerical
//! failure, 4 optimal solve did not converge (files are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svir_control::io::config::{ConfigFile, ScenarioConfig};
use svir_control::io::series::{read_annotations, read_series_file};
use svir_control::scenario::{cmd_calibrate, cmd_expost, cmd_optimize, cmd_simulate, cmd_sweep};
use svir_control::{BaselineWindow, CalibrationMode, ObservedSeries, RunReport, SvirError};

#[derive(Parser)]
#[command(
    name = "svir",
    version,
    about = "Optimal social-distancing control for the SVIR epidemic model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML); omitted keys take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `model.mu`.
    #[arg(long)]
    mu: Option<f64>,
    /// Overrides `model.eps`.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    /// Daily series CSV: `date,S,V,I,R` or `date,S_count,...` with --population.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Divides `*_count` columns.
    #[arg(long)]
    population: Option<u64>,
    /// Natural birth/death rate, taken as known.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Forward run under a fixed strategy (none, full or constant).
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Overrides `strategy.kind`.
        #[arg(long)]
        strategy: Option<String>,
        /// Level for `--strategy constant`.
        #[arg(long)]
        u: Option<f64>,
    },
    /// Optimal control by forward-backward sweep.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// No-control, full-control and optimal costs across the family parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated parameter values; overrides `sweep.values`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Estimate transmission, vaccination and recovery rates from a series.
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
        /// Relative susceptibility of the vaccinated.
        #[arg(long, default_value_t = 0.078)]
        eps: f64,
        /// `constant` (least squares over all days) or `daily` (SIR closed form).
        #[arg(long, default_value = "constant")]
        mode: String,
    },
    /// Reconstruct the realised control level day by day.
    Expost {
        #[command(flatten)]
        data: DataArgs,
        /// Rows `start:end` (0-based, end exclusive) with no restrictions in force.
        #[arg(long, default_value = "0:21")]
        baseline_window: String,
        /// Optional `date,label` CSV naming phases.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
}

fn load_scenario(args: &ScenarioArgs, strategy: Option<(&str, Option<f64>)>) -> Result<ScenarioConfig, SvirError> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| SvirError::Io {
                path: path.display().to_string(),
                source,
            })?;
            ConfigFile::from_toml_str(&text)?
        }
        None => ConfigFile::default(),
    };
    if let Some(mu) = args.mu {
        file.model.mu = mu;
    }
    if let Some(eps) = args.eps {
        file.model.eps = eps;
    }
    if let Some((kind, u)) = strategy {
        file.strategy.kind = kind.to_string();
        file.strategy.u = u;
    }
    file.resolve()
}

fn load_series(args: &DataArgs) -> Result<ObservedSeries, SvirError> {
    read_series_file(&args.data, args.population.map(|p| p as f64))
}

fn run(cli: Cli) -> Result<RunReport, SvirError> {
    match cli.command {
        Command::Simulate { scenario, strategy, u } => {
            let kind = match (strategy.as_deref(), u) {
                (Some(k), u) => Some((k, u)),
                (None, Some(u)) => Some(("constant", Some(u))),
                (None, None) => None,
            };
            let cfg = load_scenario(&scenario, kind)?;
            cmd_simulate(&cfg, &scenario.out)
        }
        Command::Optimize { scenario } => cmd_optimize(&load_scenario(&scenario, None)?, &scenario.out),
        Command::Sweep { scenario, values } => {
            let cfg = load_scenario(&scenario, None)?;
            cmd_sweep(&cfg, values.as_deref(), &scenario.out)
        }
        Command::Calibrate { data, eps, mode } => {
            let mode: CalibrationMode = mode.parse()?;
            cmd_calibrate(&load_series(&data)?, data.mu, eps, mode, &data.out)
        }
        Command::Expost {
            data,
            baseline_window,
            annotations,
        } => {
            let window: BaselineWindow = baseline_window.parse()?;
            let notes = match &annotations {
                Some(path) => Some(read_annotations(open(path)?)?),
                None => None,
            };
            cmd_expost(&load_series(&data)?, data.mu, window, notes.as_ref(), &data.out)
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File, SvirError> {
    std::fs::File::open(path).map_err(|source| SvirError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn summary(r: &RunReport) -> String {
    let mut s = format!("{}: wrote {}", r.command, r.files.join(", "));
    if let Some(c) = &r.cost {
        s.push_str(&format!(
            "\nJ = {} (social {:.2}%, infection {:.2}%, vaccination {:.2}%)",
            c.j_total,
            100.0 * c.shares.social,
            100.0 * c.shares.infection,
            100.0 * c.shares.vaccination
        ));
    }
    if let Some(c) = &r.convergence {
        s.push_str(&format!(
            "\n{} after {} sweeps (relative change {:.3e})",
            if c.converged { "converged" } else { "NOT converged" },
            c.iterations,
            c.final_rel_change
        ));
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", summary(&report));
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

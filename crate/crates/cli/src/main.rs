//! `robust-qda`: robust location/scatter, robust QDA training and
//! prediction, label-bias plots and the simulation study.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numeric failure,
//! 4 I/O error. `ROBUST_QDA_THREADS` caps the worker count.

mod commands;
mod data;
mod error;
mod model_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use robust_qda::Mode;

use crate::commands::{LbplotArgs, McdArgs, SimulateArgs, TrainArgs};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "robust-qda",
    version,
    about = "Robust QDA with block-parallel MCD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robust location and scatter of a numeric CSV.
    Mcd {
        #[arg(long)]
        data: PathBuf,
        /// Column to ignore (e.g. a label column).
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        h_frac: f64,
        /// Block count or "auto".
        #[arg(long, default_value = "auto", value_parser = parse_blocks)]
        blocks: Blocks,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a classifier and save it as a model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label_col: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Robust)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        h_frac: f64,
        #[arg(long, default_value = "auto", value_parser = parse_blocks)]
        blocks: Blocks,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = robust_qda::qda::DEFAULT_OUTLIER_QUANTILE)]
        outlier_quantile: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify rows; class 0 marks overall outliers.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label-bias plot data (and optionally SVG) for one class.
    Lbplot {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label_col: String,
        #[arg(long)]
        class: String,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the simulation study on a preset or a scenario file.
    Simulate {
        /// Scenario file, or one of clean, label, measurement, both.
        #[arg(long)]
        scenario: String,
        /// Fraction of the reference sample size (presets only).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = Methods::Both)]
        methods: Methods,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Robust,
    Classical,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Robust => Mode::Robust,
            ModeArg::Classical => Mode::Classical,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Methods {
    Both,
    Robust,
    Classical,
}

#[derive(Clone, Copy)]
struct Blocks(Option<usize>);

fn parse_blocks(s: &str) -> Result<Blocks, String> {
    if s == "auto" {
        return Ok(Blocks(None));
    }
    match s.parse::<usize>() {
        Ok(q) if q >= 1 => Ok(Blocks(Some(q))),
        _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("ROBUST_QDA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::invalid(format!(
            "ROBUST_QDA_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::invalid(format!("cannot configure {n} worker threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Mcd {
            data,
            label_col,
            h_frac,
            blocks,
            seed,
            out,
        } => {
            let report = commands::mcd(&McdArgs {
                data,
                label_col,
                h_frac,
                blocks: blocks.0,
                seed,
                out: out.clone(),
            })?;
            if out.is_none() {
                print!("{report}");
            }
        }
        Command::Train {
            data,
            label_col,
            mode,
            h_frac,
            blocks,
            seed,
            outlier_quantile,
            out,
        } => commands::train(&TrainArgs {
            data,
            label_col,
            mode: mode.into(),
            h_frac,
            blocks: blocks.0,
            seed,
            outlier_quantile,
            out,
        })?,
        Command::Predict { model, data, out } => commands::predict(&model, &data, &out)?,
        Command::Lbplot {
            model,
            data,
            label_col,
            class,
            csv,
            svg,
        } => commands::lbplot(&LbplotArgs {
            model,
            data,
            label_col,
            class,
            csv,
            svg,
        })?,
        Command::Simulate {
            scenario,
            scale,
            seed,
            reps,
            methods,
            out,
        } => {
            let methods = match methods {
                Methods::Both => vec![Mode::Robust, Mode::Classical],
                Methods::Robust => vec![Mode::Robust],
                Methods::Classical => vec![Mode::Classical],
            };
            let bench = commands::simulate(&SimulateArgs {
                scenario,
                scale,
                seed,
                reps,
                methods,
                out,
            })?;
            eprint!("{bench}");
        }
    }
    Ok(())
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

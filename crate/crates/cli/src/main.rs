//! `epicast` command-line interface.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "epicast", version, about = "Smoothing, alert analysis and forecasting for daily case curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Data {
    /// Cases CSV (`region_id,date,new_cases`).
    #[arg(long)]
    cases: Option<PathBuf>,
    /// Metadata CSV (`region_id,name,population,country,role`).
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Smoothing {
    /// Retention weight of the smoothing objective.
    #[arg(long)]
    a: Option<f64>,
    /// Noise-removal weight of the smoothing objective.
    #[arg(long)]
    b: Option<f64>,
    /// Number of candidate cutoffs.
    #[arg(long)]
    grid_size: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct Training {
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated methods, e.g. `A,B,C,D`.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and gap-fill input CSVs.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Optimized zero-phase smoothing per region.
    Smooth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        smoothing: Smoothing,
    },
    /// Alert levels and spike counts on raw and smoothed incidence.
    Alerts {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        smoothing: Smoothing,
    },
    /// Generate a seeded synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train one forecaster per method on the training regions.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        smoothing: Smoothing,
        #[command(flatten)]
        training: Training,
    },
    /// Forecast the days after each region's last date.
    Predict {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        smoothing: Smoothing,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the method matrix and write report.csv / report.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        smoothing: Smoothing,
        #[command(flatten)]
        training: Training,
    },
}

type Runner = fn(&RunConfig) -> anyhow::Result<commands::Outcome>;

fn overrides(
    common: Common,
    data: Data,
    smoothing: Smoothing,
    training: Training,
    model: Option<PathBuf>,
) -> Overrides {
    Overrides {
        seed: common.seed,
        out: common.out,
        cases: data.cases,
        metadata: data.metadata,
        model,
        a: smoothing.a,
        b: smoothing.b,
        grid_size: smoothing.grid_size,
        epochs: training.epochs,
        methods: training.methods,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common, data, smoothing, training, model): (Runner, _, _, _, _, _) = match cli.command {
        Command::Ingest { common, data } => {
            (commands::ingest, common, data, Smoothing::default(), Training::default(), None)
        }
        Command::Smooth { common, data, smoothing } => {
            (commands::smooth, common, data, smoothing, Training::default(), None)
        }
        Command::Alerts { common, data, smoothing } => {
            (commands::alerts, common, data, smoothing, Training::default(), None)
        }
        Command::Synth { common } => {
            (commands::synth, common, Data::default(), Smoothing::default(), Training::default(), None)
        }
        Command::Train { common, data, smoothing, training } => {
            (commands::train, common, data, smoothing, training, None)
        }
        Command::Predict { common, data, smoothing, model } => {
            (commands::predict, common, data, smoothing, Training::default(), model)
        }
        Command::Evaluate { common, data, smoothing, training } => {
            (commands::evaluate, common, data, smoothing, training, None)
        }
    };
    let path = common.config.clone();
    let result = RunConfig::load(path.as_deref(), &overrides(common, data, smoothing, training, model))
        .and_then(|cfg| run(&cfg).map(|o| (o, cfg)));
    match result {
        Ok((outcome, cfg)) => {
            let dir = cfg.out.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
            println!("wrote {} files to {dir}", outcome.files);
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} region(s) failed:", outcome.failures.len());
                for f in &outcome.failures {
                    eprintln!("  {}: {}", f.region_id, f.error);
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `csada`: generate data, train, evaluate, export and sweep from the command line.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csada::attack::AttackConfig;

use crate::commands::{DataArgs, TrajectoryArgs};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "csada", version, about = "Cost-sensitive training with targeted adversarial augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the three-Gaussian toy task: train.csv, test.csv and cost.csv.
    GenToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overwrite existing files.
        #[arg(long)]
        force: bool,
    },
    /// Run an experiment config, once per replicate.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. `--set train.lambda=0.5`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint on a labeled CSV file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Cost matrix CSV; all-ones when omitted.
        #[arg(long)]
        cost: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the pairwise error table.
        #[arg(long)]
        pairwise: Option<PathBuf>,
    },
    /// Export plot-ready CSV files from a checkpoint.
    Export {
        #[command(subcommand)]
        what: Export,
    },
    /// Train one CSADA run per lambda and replicate, appending to a resumable table.
    SweepLambda {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list, e.g. `0,0.1,1`.
        // the full path keeps clap from treating the field as a repeated flag
        #[arg(long, value_parser = commands::parse_lambdas)]
        lambdas: std::vec::Vec<f64>,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(clap::Args)]
struct LabelArgs {
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Class names in model output order, comma separated.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Export {
    /// Predicted class and probabilities on a regular 2-D grid.
    Boundary {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
        y_min: f64,
        #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
        y_max: f64,
    },
    /// Attack paths for a few sampled points of one class toward another.
    Trajectories {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        labels: LabelArgs,
        /// Source class, by name or index.
        #[arg(long)]
        source: String,
        /// Target class, by name or index.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenToy { out, seed, force } => commands::gen_toy(&out, seed, force),
        Command::Train { config, overrides } => commands::train(&config, &overrides),
        Command::Eval {
            checkpoint,
            data,
            cost,
            labels,
            out,
            pairwise,
        } => commands::eval(
            &checkpoint,
            &DataArgs {
                path: &data,
                label_column: &labels.label_column,
                classes: labels.classes.as_deref(),
            },
            cost.as_deref(),
            out.as_deref(),
            pairwise.as_deref(),
        ),
        Command::Export { what } => match what {
            Export::Boundary {
                checkpoint,
                out,
                resolution,
                x_min,
                x_max,
                y_min,
                y_max,
            } => commands::export_boundary(&checkpoint, &out, resolution, (x_min, x_max), (y_min, y_max)),
            Export::Trajectories {
                checkpoint,
                data,
                labels,
                source,
                target,
                points,
                seed,
                epsilon,
                steps,
                step_size,
                out,
            } => commands::export_trajectories(
                &checkpoint,
                &DataArgs {
                    path: &data,
                    label_column: &labels.label_column,
                    classes: labels.classes.as_deref(),
                },
                &TrajectoryArgs {
                    source: &source,
                    target: &target,
                    points,
                    seed,
                    attack: AttackConfig {
                        epsilon,
                        steps,
                        step_size,
                        clamp: None,
                    },
                },
                &out,
            ),
        },
        Command::SweepLambda {
            config,
            lambdas,
            overrides,
        } => commands::sweep_lambda(&config, &overrides, &lambdas),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; help and version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

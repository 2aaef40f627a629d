mod cmd;
mod common;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "treenc",
    version,
    about = "Tree-transformer classification of DOM nodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Trenc,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Rules,
    Similarity,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    TextTask,
    StructureTask,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, simplify and split HTML pages into a dataset file.
    Preprocess {
        /// Directory of HTML files.
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON object mapping file names to shopping interests.
        #[arg(long)]
        interest_map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = treenc::dom::DEFAULT_MAX_NODES)]
        max_nodes: usize,
        #[arg(long, default_value_t = treenc::dom::DEFAULT_MIN_NODES)]
        min_nodes: usize,
    },
    /// Split a dataset into interest-disjoint train/validation/test replicates.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = treenc::evaluation::DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a labeled synthetic corpus.
    Generate {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on one replicate and keep its best snapshots.
    Train {
        #[command(flatten)]
        data: common::DataArgs,
        #[arg(long, default_value = "1")]
        replicate: usize,
        #[command(flatten)]
        model: common::ModelArgs,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
        /// Continue from the state saved in the checkpoint directory.
        #[arg(long)]
        resume: bool,
        /// Stop (resumably) once this many epochs have completed.
        #[arg(long)]
        stop_after_epoch: Option<usize>,
    },
    /// Write snapshot-ensemble predictions for one replicate's test trees.
    Predict {
        #[command(flatten)]
        data: common::DataArgs,
        #[arg(long, default_value = "1")]
        replicate: usize,
        #[arg(long)]
        ckpt_dir: PathBuf,
        /// Prediction file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model or a baseline on the test partitions.
    Evaluate {
        #[command(flatten)]
        data: common::DataArgs,
        /// Replicate number or "all".
        #[arg(long, default_value = "1")]
        replicate: String,
        /// Checkpoint directory; with "--replicate all" it holds replicate-N subdirectories.
        #[arg(long)]
        ckpt_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Score an existing prediction file instead of a model.
        #[arg(long, conflicts_with_all = ["ckpt_dir", "baseline"])]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        model: common::ModelArgs,
        /// Tune the MLP baseline depth on validation F1.
        #[arg(long)]
        tune_mlp_depth: bool,
        /// Report file (JSON); a text table and predictions are written beside it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess {
            input,
            interest_map,
            out,
            max_nodes,
            min_nodes,
        } => cmd::preprocess::run(&input, &interest_map, &out, max_nodes, min_nodes),
        Command::Split {
            input,
            seed,
            replicates,
            out,
        } => cmd::split::run(&input, common::seed_override(seed)?, replicates, &out),
        Command::Generate {
            task,
            trees,
            seed,
            out,
        } => cmd::generate::run(task, trees, common::seed_override(seed)?, &out),
        Command::Train {
            data,
            replicate,
            model,
            out,
            resume,
            stop_after_epoch,
        } => cmd::train::run(&data, replicate, &model, &out, resume, stop_after_epoch),
        Command::Predict {
            data,
            replicate,
            ckpt_dir,
            out,
        } => cmd::evaluate::predict(&data, replicate, &ckpt_dir, &out),
        Command::Evaluate {
            data,
            replicate,
            ckpt_dir,
            baseline,
            predictions,
            model,
            tune_mlp_depth,
            out,
        } => {
            let source = match (baseline, ckpt_dir, predictions) {
                (Some(b), _, _) => cmd::evaluate::Source::Baseline(b, tune_mlp_depth),
                (None, Some(dir), _) => cmd::evaluate::Source::Checkpoints(dir),
                (None, None, Some(p)) => cmd::evaluate::Source::Predictions(p),
                (None, None, None) => {
                    return Err(CliError::usage(
                        "evaluate needs --ckpt-dir, --baseline or --predictions",
                    ))
                }
            };
            cmd::evaluate::run(&data, &replicate, source, &model, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}

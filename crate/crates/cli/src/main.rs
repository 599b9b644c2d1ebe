//! `lexfuse` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lexfuse", version, about = "Train and evaluate merged multiple-choice solvers")]
pub struct Cli {
    /// key=value file supplying defaults for any subcommand flag.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run lexical modules over a question file.
    Modules {
        #[command(subcommand)]
        command: ModulesCommand,
    },
    /// Fit merge weights by maximum likelihood.
    Train(TrainArgs),
    /// Score individual modules and merged rules on test questions.
    Eval(EvalArgs),
    /// Answer questions with a trained weight file.
    Solve(SolveArgs),
    /// Generate a synthetic benchmark.
    Gen(GenArgs),
    /// Build co-occurrence count files from plain text.
    IngestCorpus(IngestArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModulesCommand {
    Run(ModulesRunArgs),
}

#[derive(Debug, Args)]
pub struct ModulesRunArgs {
    #[arg(long, value_name = "PATH")]
    pub questions: PathBuf,
    /// Module id (thesaurus, cooccurrence, embedding, phrase-vectors,
    /// thesaurus-paths, relation:<label>, similarity:<name>) or `all` for
    /// every module matching the question kind.
    #[arg(long = "module", value_name = "ID", required = true)]
    pub modules: Vec<String>,
    #[arg(long, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "cooc_unigrams")]
    pub cooc_pairs: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "cooc_pairs")]
    pub cooc_unigrams: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Template file; the bundled list is used when absent.
    #[arg(long, value_name = "PATH")]
    pub patterns: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub hits: Option<PathBuf>,
    /// Dictionary for a similarity module, as NAME=PATH.
    #[arg(long = "definitions", value_name = "NAME=PATH", value_parser = parse_named_path)]
    pub definitions: Vec<(String, PathBuf)>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    /// Fraction of labelled questions used for training in a seeded random
    /// split.
    #[arg(long, value_name = "R", conflicts_with_all = ["train_ids", "test_ids"])]
    pub split_ratio: Option<f64>,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub split_seed: u64,
    /// File of training question ids, one per line.
    #[arg(long, value_name = "PATH", requires = "test_ids")]
    pub train_ids: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "train_ids")]
    pub test_ids: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Question file carrying the answer key.
    #[arg(long, value_name = "PATH")]
    pub questions: PathBuf,
    #[arg(long = "forecasts", value_name = "PATH", required = true)]
    pub forecasts: Vec<PathBuf>,
    /// mixture, logarithmic, product or all.
    #[arg(
        long = "rule",
        value_name = "RULE",
        default_values_t = ["all".to_string()],
        value_parser = ["mixture", "logarithmic", "product", "all"]
    )]
    pub rules: Vec<String>,
    /// Rule used to fit each module's individual weight.
    #[arg(
        long,
        value_name = "RULE",
        default_value = "product",
        value_parser = ["mixture", "logarithmic", "product"]
    )]
    pub individual_rule: String,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "N", default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_name = "X", default_value_t = 0.05)]
    pub initial_step: f64,
    #[arg(long, value_name = "X", default_value_t = 1e-4)]
    pub min_step: f64,
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    pub max_evaluations: usize,
    #[arg(long)]
    pub no_deterministic_starts: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct PolicyArgs {
    /// Answer only when the top probability strictly exceeds this.
    #[arg(long, value_name = "X", default_value_t = 1.0 / 3.0)]
    pub threshold: f64,
    #[arg(long, value_name = "X", default_value_t = 1.0)]
    pub reward: f64,
    #[arg(long, value_name = "X", default_value_t = -0.5, allow_negative_numbers = true)]
    pub penalty: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub questions: PathBuf,
    #[arg(long = "forecasts", value_name = "PATH", required = true)]
    pub forecasts: Vec<PathBuf>,
    /// Weight file to evaluate; repeatable.
    #[arg(long = "weights", value_name = "PATH", required_unless_present = "weights_dir")]
    pub weights: Vec<PathBuf>,
    /// Directory written by `train`; every weights.*.txt file is evaluated.
    #[arg(long, value_name = "DIR")]
    pub weights_dir: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Report path; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    #[arg(long = "forecasts", value_name = "PATH", required = true)]
    pub forecasts: Vec<PathBuf>,
    /// Solve these questions, in file order; all forecast instances when absent.
    #[arg(long, value_name = "PATH")]
    pub questions: Option<PathBuf>,
    /// Print SKIP when the top probability does not exceed the threshold.
    #[arg(long)]
    pub skip: bool,
    #[arg(long, value_name = "X", default_value_t = 1.0 / 3.0)]
    pub threshold: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Comma-separated per-module accuracies.
    #[arg(long, value_name = "A1,A2,...", value_delimiter = ',', required = true)]
    pub accuracies: Vec<f64>,
    #[arg(long, value_name = "N")]
    pub m: usize,
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub k: usize,
    #[arg(long, value_name = "X", default_value_t = lexfuse::eval::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Text file; each file is one document. Repeatable.
    #[arg(long = "input", value_name = "PATH", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = lexfuse::lexmodules::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, value_name = "PATH")]
    pub out_pairs: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out_unigrams: PathBuf,
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn run(args: Vec<OsString>) -> ExitCode {
    let cli = match config::parse_with_config(args) {
        Ok(cli) => cli,
        Err(config::ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
        Err(config::ParseFailure::Config(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    run(std::env::args_os().collect())
}

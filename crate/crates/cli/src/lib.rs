//! Command-line front end for building and evaluating the negated
//! commonsense corpus.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

mod commands;
pub mod config;
pub mod manifest;

pub use config::{LoadedConfig, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] negkb::Error),
}

impl CliError {
    /// 1 for usage/config problems, 2 for bad data, 3 for backend failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.category() {
                negkb::error::ErrorCategory::Data => 2,
                negkb::error::ErrorCategory::Backend => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Core(e) => e.kind(),
        }
    }

    /// The single-line JSON written to stderr on failure.
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "negkb", version, about = "Build and evaluate a negated commonsense knowledge corpus")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load ATOMIC/ANION, drop underspecified triples, write originals.jsonl.
    Ingest {
        #[arg(long)]
        split: Option<String>,
    },
    /// Produce the negated variants of every original.
    Negate(InputArgs),
    /// Build the judge training set (Valid/Invalid/Ambiguous).
    JudgeBuild(InputArgs),
    /// Score judge verdicts against gold labels.
    JudgeEval(JudgeEvalArgs),
    /// Label every triple with the judge.
    Label(InputArgs),
    /// Label distribution per source, relation and polarity.
    Stats(InputArgs),
    /// Assemble contrastive, baseline and ablation corpora.
    Build(BuildArgs),
    /// Sample the human-annotation benchmark from the test split.
    BenchSample(BenchArgs),
    /// Serve the annotation HTTP API.
    AnnotateServe(ServeArgs),
    /// Run and score a downstream evaluation.
    Eval(EvalArgs),
    /// McNemar test between two runs.
    Significance(SignificanceArgs),
    /// Run the configured stages in order.
    Pipeline,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct JudgeEvalArgs {
    /// Labeled triples with gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    /// Precomputed verdicts; the configured judge is run when omitted.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub originals: Option<PathBuf>,
    #[arg(long)]
    pub invalid_pool: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Also create an annotation session in this directory.
    #[arg(long)]
    pub session: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub session: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long)]
    pub adjudicator: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// condaqa, rte, snli, mnli, nevir or commonsenseqa.
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub gold: PathBuf,
    /// Existing predictions; inference runs when omitted.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Report of the model to compare against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Text inserted as in-context exemplars.
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
    /// Label set for multiple-choice tasks.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    /// Run name; defaults to the task.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SignificanceArgs {
    /// Report or predictions of the first system.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Gold file; when given, `--a`/`--b` are prediction files.
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

impl Cli {
    pub fn load_config(&self) -> Result<LoadedConfig, CliError> {
        let mut overrides = self.set.clone();
        if let Some(dir) = &self.output_dir {
            let abs = std::path::absolute(dir).map_err(|e| negkb::Error::io(dir, e))?;
            overrides.push(format!("output_dir={}", toml::Value::String(abs.to_string_lossy().into_owned())));
        }
        LoadedConfig::load(self.config.as_deref(), &overrides)
    }
}

/// Runs one parsed command and returns its summary.
pub fn run(cli: &Cli) -> Result<Value, CliError> {
    let cfg = cli.load_config()?;
    match &cli.command {
        Command::Ingest { split } => commands::ingest(&cfg, split.as_deref()),
        Command::Negate(a) => commands::negate(&cfg, a),
        Command::JudgeBuild(a) => commands::judge_build(&cfg, a),
        Command::JudgeEval(a) => commands::judge_eval(&cfg, a),
        Command::Label(a) => commands::label(&cfg, a),
        Command::Stats(a) => commands::stats(&cfg, a),
        Command::Build(a) => commands::build(&cfg, a),
        Command::BenchSample(a) => commands::bench_sample(&cfg, a),
        Command::AnnotateServe(a) => commands::annotate_serve(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Significance(a) => commands::significance(&cfg, a),
        Command::Pipeline => commands::pipeline(&cfg),
    }
}

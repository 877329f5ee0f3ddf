use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand};

use ipforge_cli::config::load_config;
use ipforge_cli::runner::{run, RunOptions, Subcommand};

/// Pipeline for assembling and evaluating IP-domain language model
/// training data: corpus curation, synthetic-document assembly, tokenizer
/// extension, data scheduling, kernel verification, evaluation metrics,
/// and inference-cost modeling.
#[derive(Parser)]
#[command(name = "ipforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Parser)]
struct CommonArgs {
    /// Pipeline config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Filter, deduplicate, and up-sample the document corpus.
    Preprocess(CommonArgs),
    /// Build synthetic documents and text pairs from patents and wrappers.
    Synthesize(CommonArgs),
    /// Train the tokenizer, merge vocabularies, and count tokens.
    Tokenize(CommonArgs),
    /// Plan stage quotas, sample schedules, and pack batches.
    Schedule(CommonArgs),
    /// Check analytic kernel gradients against finite differences.
    VerifyKernels(CommonArgs),
    /// Score model outputs with the task metrics and pairwise judge.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one task (qa, writing, classification, summary,
        /// reasoning, correction, translation, exam, match).
        #[arg(long)]
        task: Option<String>,
        /// Override the model outputs file from the config.
        #[arg(long)]
        outputs: Option<PathBuf>,
        /// Override the judge endpoint from the config.
        #[arg(long)]
        judge_endpoint: Option<String>,
    },
    /// Emit memory and latency curves for the architecture presets.
    Cost {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one architecture preset.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Run every stage in order.
    All(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut opts = RunOptions::default();
    let mut outputs_override: Option<PathBuf> = None;
    let mut judge_override: Option<String> = None;
    let (sub, common) = match &cli.command {
        Command::Preprocess(c) => (Subcommand::Preprocess, c),
        Command::Synthesize(c) => (Subcommand::Synthesize, c),
        Command::Tokenize(c) => (Subcommand::Tokenize, c),
        Command::Schedule(c) => (Subcommand::Schedule, c),
        Command::VerifyKernels(c) => (Subcommand::VerifyKernels, c),
        Command::Evaluate { common, task, outputs, judge_endpoint } => {
            if let Some(task) = task {
                match serde_json::from_value(serde_json::Value::String(task.clone())) {
                    Ok(kind) => opts.task = Some(kind),
                    Err(_) => {
                        eprintln!("config error: unknown task {task:?}");
                        return ExitCode::from(2);
                    }
                }
            }
            outputs_override = outputs.clone();
            judge_override = judge_endpoint.clone();
            (Subcommand::Evaluate, common)
        }
        Command::Cost { common, preset } => {
            opts.preset = preset.clone();
            (Subcommand::Cost, common)
        }
        Command::All(c) => (Subcommand::All, c),
    };

    // invalid config is exit 2 with field-level messages; stage failures
    // are exit 1 with a partial manifest already on disk
    let mut loaded = match load_config(&common.config, common.seed) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(path) = outputs_override {
        loaded.config.paths.model_outputs = Some(path);
    }
    if let Some(endpoint) = judge_override {
        loaded.config.eval.judge_endpoint = endpoint;
    }

    match run(sub, &loaded, &opts) {
        Ok(manifest) => {
            eprintln!(
                "{} complete: {} stage(s), config {}",
                manifest.subcommand,
                manifest.stages.len(),
                manifest.config_hash
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{} failed: {e:#}", sub.name());
            ExitCode::from(1)
        }
    }
}

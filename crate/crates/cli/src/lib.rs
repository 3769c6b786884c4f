//! Command-line front end for the `t2n` pipeline.
//!
//! Every subcommand reads the same JSON configuration, optionally patched
//! with `--set key.path=value`, and writes a `manifest_<command>.json` next
//! to its artifacts.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Task;
use config::PipelineConfig;
use manifest::RunManifest;

/// Bad command-line input or configuration. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// 2 for validation and usage errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<t2n_core::Error>() {
            return if e.is_validation() { EXIT_USAGE } else { EXIT_RUNTIME };
        }
    }
    EXIT_RUNTIME
}

#[derive(Debug, Parser)]
#[command(name = "t2n", version, about = "Map free-text phrases to concepts in a taxonomy")]
pub struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set mapper.train.epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Global seed. Falls back to the config, then T2N_SEED, then 1.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Run everything on one thread.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Directory for artifacts and manifests.
    #[arg(long, short = 'o', global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic taxonomy, labelled pairs and a text corpus.
    Synth,
    /// Learn concept embeddings from random walks over the taxonomy.
    TrainNodes {
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Learn word embeddings from a corpus with one sentence per line.
    TrainWords {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Use pretrained word vectors from a text vector file.
    ImportWords {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train the phrase-to-concept mapping model.
    TrainMapper {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// linear, cnn or bilstm.
        #[arg(long)]
        arch: Option<String>,
    },
    /// Map phrases to their nearest concepts and print CSV.
    Map {
        /// Phrase to map; repeatable.
        #[arg(long)]
        phrase: Vec<String>,
        /// File with one phrase per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, short)]
        k: Option<usize>,
    },
    /// Train and score a model under an evaluation protocol.
    Eval {
        /// intrinsic, restricted or zero_shot.
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        arch: Option<String>,
    },
}

/// Fold command flags into the configuration.
fn prepare(cli: Cli) -> Result<(Task, PipelineConfig, bool)> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = cli.output_dir {
        cfg.paths.output_dir = dir;
    }
    let task = match cli.command {
        Command::Synth => Task::Synth,
        Command::TrainNodes { taxonomy } => {
            cfg.paths.taxonomy = taxonomy.or(cfg.paths.taxonomy);
            Task::TrainNodes
        }
        Command::TrainWords { corpus } => {
            cfg.paths.corpus = corpus.or(cfg.paths.corpus);
            Task::TrainWords
        }
        Command::ImportWords { input } => Task::ImportWords { input },
        Command::TrainMapper { pairs, arch } => {
            cfg.paths.pairs = pairs.or(cfg.paths.pairs);
            if let Some(a) = arch {
                cfg.mapper.architecture = a;
            }
            Task::TrainMapper
        }
        Command::Map { phrase, input, output, k } => {
            if phrase.is_empty() && input.is_none() {
                return Err(UsageError("map needs --phrase or --input".into()).into());
            }
            Task::Map {
                phrases: phrase,
                input,
                output,
                k: k.unwrap_or(cfg.mapper.k),
            }
        }
        Command::Eval { protocol, taxonomy, pairs, arch } => {
            cfg.paths.taxonomy = taxonomy.or(cfg.paths.taxonomy);
            cfg.paths.pairs = pairs.or(cfg.paths.pairs);
            if let Some(a) = arch {
                cfg.mapper.architecture = a;
            }
            let protocol = match protocol {
                Some(p) => p.parse().map_err(|e: t2n_core::Error| UsageError(e.to_string()))?,
                None => cfg.eval.protocol,
            };
            Task::Eval { protocol }
        }
    };
    if let Task::Map { k: 0, .. } = task {
        return Err(UsageError("k must be positive".into()).into());
    }
    cfg.resolve_seed(cli.seed)?;
    cfg.validate()?;
    Ok((task, cfg, !cli.deterministic))
}

/// Run one subcommand. Configuration problems are reported before any
/// work starts; once work starts a manifest is written whether or not the
/// command succeeds.
pub fn run(cli: Cli) -> Result<()> {
    let (task, cfg, parallel) = prepare(cli)?;
    let mut manifest = RunManifest::start(task.name(), cfg.seed(), cfg.digest()?, serde_json::to_value(&cfg)?);
    let outcome = commands::execute(&task, &cfg, parallel, &mut manifest);
    manifest.finish(&outcome);
    let written = manifest.write(&cfg.paths.output_dir);
    outcome?;
    written.map(|_| ())
}

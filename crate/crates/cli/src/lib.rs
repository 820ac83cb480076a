//! Command-line front end: `train`, `generate`, `inspect` and `serve`.
//!
//! Every command returns a [`CliError`] carrying its exit code instead of
//! exiting, so the binary is a thin wrapper and tests can drive the
//! commands in-process.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gradhorizon::{GenerationMode, Optimizer, TrainingConfig};

mod commands;
pub mod serve;

pub use commands::{generate, inspect, train};

/// Exit code for unreadable or unwritable files.
pub const EXIT_IO: i32 = 1;
/// Exit code for bad flags, bad input files and unknown batch indices.
pub const EXIT_INVALID: i32 = 2;
/// Exit code for a training run that produced non-finite weights.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "gradhorizon", version, about = "Train a character-level RNN and explore how far its gradients reach back in time")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a text corpus, writing a gradient log and the final weights
    Train(TrainArgs),
    /// Generate text from a saved model
    Generate(GenerateArgs),
    /// Print a summary of a gradient log, or the detail of one batch
    Inspect(InspectArgs),
    /// Serve a gradient log and the explorer UI over HTTP
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training text (UTF-8)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Where to write the gradient log
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the trained weights
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Characters per batch
    #[arg(long, default_value_t = 25)]
    pub batch_size: usize,
    /// Hidden units
    #[arg(long, default_value_t = 100)]
    pub hidden_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// sgd or adagrad
    #[arg(long, default_value = "adagrad")]
    pub optimizer: Optimizer,
    /// Gradients are clipped entrywise to [-c, c]
    #[arg(long, default_value_t = 5.0)]
    pub clip_threshold: f64,
    /// Record itemized gradients every R batches; also the loss print cadence
    #[arg(long, default_value_t = 100)]
    pub record_interval: usize,
    /// Deepest backward distance kept per loss origin
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    #[arg(long, default_value_t = 50_000)]
    pub max_batches: usize,
    /// Standard deviation of the initial weights
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon_adagrad: f64,
}

impl TrainArgs {
    pub fn config(&self) -> TrainingConfig {
        TrainingConfig {
            batch_size: self.batch_size,
            hidden_size: self.hidden_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            clip_threshold: self.clip_threshold,
            record_interval: self.record_interval,
            horizon: self.horizon,
            max_batches: self.max_batches,
            init_scale: self.init_scale,
            seed: self.seed,
            epsilon_adagrad: self.epsilon_adagrad,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Model file written by `train --model-out`
    #[arg(long)]
    pub model: PathBuf,
    /// Number of characters to print
    #[arg(long)]
    pub length: usize,
    /// First input character; defaults to the first vocabulary symbol
    #[arg(long)]
    pub seed_char: Option<char>,
    /// argmax or sample
    #[arg(long, default_value = "sample")]
    pub mode: GenerationMode,
    /// Sampling seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Gradient log written by `train`
    #[arg(long)]
    pub log: PathBuf,
    /// Show one recorded batch in detail
    #[arg(long)]
    pub batch: Option<usize>,
    /// Magnitude threshold for the per-origin gradient horizon
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Gradient log to serve at /api/log
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Built UI to serve at /; a minimal built-in page is used otherwise
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Train(args) => train(&args, &mut out),
        Command::Generate(args) => generate(&args, &mut out),
        Command::Inspect(args) => inspect(&args, &mut out),
        Command::Serve(args) => {
            drop(out);
            serve::run(&args)
        }
    }
}

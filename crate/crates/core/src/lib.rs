//! Character-level recurrent network training with itemized
//! backpropagation-through-time gradients.
//!
//! The crate trains a single-layer tanh RNN on text and, every few
//! batches, decomposes the recurrent-weight gradient by the loss that
//! produced it and by how many steps back it travelled. The resulting
//! [`GradientLog`] is what the explorer UI and the `inspect` command read.

pub mod backprop;
pub mod error;
pub mod gradlog;
pub mod modelfile;
pub mod rnn;
pub mod trainer;
pub mod vocab;

pub use backprop::{
    aggregate_magnitude, bptt_itemized, bptt_standard, decay_ratios, gradient_horizon,
    GradientSet, ItemizedGradients,
};
pub use error::{Error, FormatError, Result};
pub use gradlog::{BatchRecord, GradientLog, LogSummary, RunMeta, SCHEMA_VERSION};
pub use modelfile::{load_model, save_model};
pub use rnn::{forward_batch, forward_step, ForwardTrace, HiddenState, ModelParams, StepRecord};
pub use trainer::{
    apply_update, clip_gradients, generate, make_batches, train, train_with, BatchReport,
    GenerationMode, LossSmoother, Optimizer, OptimizerState, Trainer, TrainingConfig,
};
pub use vocab::{one_hot, Vocabulary};

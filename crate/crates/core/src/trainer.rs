//! Batching, the gradient-descent loop, periodic itemized recording and
//! text generation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backprop::{bptt_itemized, bptt_standard, GradientSet};
use crate::error::{Error, Result};
use crate::gradlog::{BatchRecord, GradientLog, RunMeta};
use crate::rnn::{argmax, forward_batch, forward_step, HiddenState, ModelParams};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adagrad,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adagrad => "adagrad",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adagrad" => Ok(Optimizer::Adagrad),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Hyperparameters and recording policy. Together with the corpus this
/// fully determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Entrywise gradient clamp.
    pub clip_threshold: f64,
    /// Itemize every `record_interval`-th batch (and batch 0).
    pub record_interval: usize,
    /// How many steps back each loss is followed when itemizing.
    pub horizon: usize,
    pub max_batches: usize,
    /// Standard deviation of the Gaussian weight init.
    pub init_scale: f64,
    pub seed: u64,
    pub epsilon_adagrad: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 25,
            hidden_size: 100,
            learning_rate: 0.1,
            optimizer: Optimizer::Adagrad,
            clip_threshold: 5.0,
            record_interval: 100,
            horizon: 5,
            max_batches: 50_000,
            init_scale: 0.01,
            seed: 1,
            epsilon_adagrad: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.batch_size < 2 {
            return fail("batch size must be at least 2");
        }
        if self.hidden_size == 0 {
            return fail("hidden size must be at least 1");
        }
        if self.record_interval == 0 {
            return fail("record interval must be at least 1");
        }
        if self.max_batches == 0 {
            return fail("max batches must be at least 1");
        }
        // Zero is allowed: it freezes the weights, which is useful for
        // baselines.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail("learning rate must be finite and non-negative");
        }
        if !(self.clip_threshold > 0.0) {
            return fail("clip threshold must be positive");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return fail("init scale must be finite and non-negative");
        }
        if !(self.epsilon_adagrad.is_finite() && self.epsilon_adagrad > 0.0) {
            return fail("adagrad epsilon must be positive");
        }
        Ok(())
    }
}

/// One training window: `targets` is `inputs` shifted by one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Batch<'a> {
    pub offset: usize,
    pub inputs: &'a [usize],
    pub targets: &'a [usize],
}

/// Splits the corpus into consecutive windows of `n` inputs. The trailing
/// remainder that cannot fill a window is dropped, so there are
/// `(len - 1) / n` batches.
pub fn make_batches(corpus: &[usize], n: usize) -> Result<Vec<Batch<'_>>> {
    if n == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if corpus.len() < n + 1 {
        return Err(Error::CorpusTooShort {
            len: corpus.len(),
            needed: n + 1,
        });
    }
    let count = (corpus.len() - 1) / n;
    Ok((0..count)
        .map(|b| {
            let offset = b * n;
            Batch {
                offset,
                inputs: &corpus[offset..offset + n],
                targets: &corpus[offset + 1..offset + n + 1],
            }
        })
        .collect())
}

pub fn clip_gradients(g: &GradientSet, threshold: f64) -> GradientSet {
    let mut out = g.clone();
    clip_in_place(&mut out, threshold);
    out
}

fn clip_in_place(g: &mut GradientSet, threshold: f64) {
    for (_, m) in g.named_mut() {
        m.mapv_inplace(|x| x.clamp(-threshold, threshold));
    }
}

/// Adagrad's running sum of squared gradients, one matrix per weight.
/// Unused (and empty) under plain SGD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    accumulated: Option<GradientSet>,
}

impl OptimizerState {
    pub fn accumulated(&self) -> Option<&GradientSet> {
        self.accumulated.as_ref()
    }
}

/// One descent step. The new weights are computed in full and checked
/// before anything is written, so a failed update leaves `params` and
/// `state` untouched.
pub fn apply_update(
    params: &mut ModelParams,
    grads: &GradientSet,
    cfg: &TrainingConfig,
    state: &mut OptimizerState,
    batch_index: usize,
) -> Result<()> {
    let lr = cfg.learning_rate;
    let (new_params, new_acc) = match cfg.optimizer {
        Optimizer::Sgd => {
            let step = |p: &ndarray::Array2<f64>, g: &ndarray::Array2<f64>| p - &(g * lr);
            (
                ModelParams {
                    u: step(&params.u, &grads.du),
                    w: step(&params.w, &grads.dw),
                    v: step(&params.v, &grads.dv),
                },
                None,
            )
        }
        Optimizer::Adagrad => {
            let mut acc = state
                .accumulated
                .clone()
                .unwrap_or_else(|| GradientSet::zeros_like(params));
            for ((_, a), (_, g)) in acc.named_mut().into_iter().zip(grads.named()) {
                a.zip_mut_with(g, |a, &g| *a += g * g);
            }
            let eps = cfg.epsilon_adagrad;
            let step = |p: &ndarray::Array2<f64>, g: &ndarray::Array2<f64>, a: &ndarray::Array2<f64>| {
                let mut out = p.clone();
                ndarray::Zip::from(&mut out)
                    .and(g)
                    .and(a)
                    .for_each(|p, &g, &a| *p -= lr * g / (a + eps).sqrt());
                out
            };
            (
                ModelParams {
                    u: step(&params.u, &grads.du, &acc.du),
                    w: step(&params.w, &grads.dw, &acc.dw),
                    v: step(&params.v, &grads.dv, &acc.dv),
                },
                Some(acc),
            )
        }
    };
    if let Err(Error::NonFinite { matrix }) = new_params.check_finite() {
        return Err(Error::NumericAbort {
            matrix,
            batch: batch_index,
        });
    }
    *params = new_params;
    if new_acc.is_some() {
        state.accumulated = new_acc;
    }
    Ok(())
}

/// Moving average of the last `window` per-character batch losses.
#[derive(Debug, Clone)]
pub struct LossSmoother {
    window: usize,
    values: VecDeque<f64>,
}

impl LossSmoother {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            values: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, loss: f64) -> f64 {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(loss);
        self.value()
    }

    pub fn value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }
}

/// What happened in one call to [`Trainer::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub batch_index: usize,
    pub char_offset: usize,
    /// Mean per-character loss before the update.
    pub mean_loss: f64,
    pub recorded: bool,
}

/// Stepwise training loop.
///
/// The hidden state is carried from one batch to the next and reset to
/// zero whenever the batch sequence wraps back to the start of the corpus.
pub struct Trainer {
    cfg: TrainingConfig,
    vocab: Vocabulary,
    corpus: Vec<usize>,
    batches_per_pass: usize,
    params: ModelParams,
    optimizer: OptimizerState,
    hidden: HiddenState,
    next_batch: usize,
    log: GradientLog,
}

impl Trainer {
    pub fn new(text: &str, cfg: TrainingConfig, corpus_id: impl Into<String>) -> Result<Self> {
        cfg.validate()?;
        let vocab = Vocabulary::build(text)?;
        let corpus = vocab.encode(text)?;
        let batches_per_pass = make_batches(&corpus, cfg.batch_size)?.len();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::random(cfg.hidden_size, vocab.len(), cfg.init_scale, &mut rng);

        let meta = RunMeta {
            hidden_size: cfg.hidden_size,
            batch_size: cfg.batch_size,
            horizon: cfg.horizon,
            record_interval: cfg.record_interval,
            vocab: vocab.to_string(),
            optimizer: cfg.optimizer.to_string(),
            learning_rate: cfg.learning_rate,
            init_scale: cfg.init_scale,
            seed: cfg.seed,
            corpus_id: corpus_id.into(),
        };
        let log = GradientLog::new(meta).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            hidden: HiddenState::zeros(cfg.hidden_size),
            cfg,
            vocab,
            corpus,
            batches_per_pass,
            params,
            optimizer: OptimizerState::default(),
            next_batch: 0,
            log,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn log(&self) -> &GradientLog {
        &self.log
    }

    pub fn batches_per_pass(&self) -> usize {
        self.batches_per_pass
    }

    pub fn batches_done(&self) -> usize {
        self.next_batch
    }

    pub fn is_finished(&self) -> bool {
        self.next_batch >= self.cfg.max_batches
    }

    /// Hidden state the next batch will start from.
    pub fn next_hidden(&self) -> HiddenState {
        if self.next_batch.is_multiple_of(self.batches_per_pass) {
            HiddenState::zeros(self.cfg.hidden_size)
        } else {
            self.hidden.clone()
        }
    }

    /// Trains on the next batch, itemizing it if it falls on the record
    /// interval.
    pub fn step(&mut self) -> Result<BatchReport> {
        let b = self.next_batch;
        let n = self.cfg.batch_size;
        let offset = (b % self.batches_per_pass) * n;
        let h0 = self.next_hidden();
        let inputs = &self.corpus[offset..offset + n];
        let targets = &self.corpus[offset + 1..offset + n + 1];

        let trace = forward_batch(&self.params, &h0, inputs, targets)?;
        let recorded = b.is_multiple_of(self.cfg.record_interval);
        let mut grads = if recorded {
            let (grads, item) = bptt_itemized(&trace, &self.params, self.cfg.horizon)?;
            let record = BatchRecord::from_itemized(b, offset, &trace, &item, &self.vocab)?;
            self.log.append_record(record).map_err(|e| Error::Config(e.to_string()))?;
            grads
        } else {
            bptt_standard(&trace, &self.params)?
        };
        if !grads.is_finite() {
            let matrix = grads
                .named()
                .iter()
                .find(|(_, m)| !m.iter().all(|x| x.is_finite()))
                .map(|(name, _)| *name)
                .unwrap_or("W");
            return Err(Error::NumericAbort { matrix, batch: b });
        }
        clip_in_place(&mut grads, self.cfg.clip_threshold);
        apply_update(&mut self.params, &grads, &self.cfg, &mut self.optimizer, b)?;

        self.hidden = trace.last_hidden().clone();
        self.next_batch += 1;
        Ok(BatchReport {
            batch_index: b,
            char_offset: offset,
            mean_loss: trace.mean_loss(),
            recorded,
        })
    }

    pub fn into_parts(self) -> (ModelParams, Vocabulary, GradientLog) {
        (self.params, self.vocab, self.log)
    }
}

/// Runs `cfg.max_batches` batches, calling `on_batch` after each one.
pub fn train_with<F>(
    text: &str,
    cfg: TrainingConfig,
    corpus_id: &str,
    mut on_batch: F,
) -> Result<(ModelParams, Vocabulary, GradientLog)>
where
    F: FnMut(&BatchReport),
{
    let mut trainer = Trainer::new(text, cfg, corpus_id)?;
    while !trainer.is_finished() {
        let report = trainer.step()?;
        on_batch(&report);
    }
    Ok(trainer.into_parts())
}

pub fn train(text: &str, cfg: TrainingConfig) -> Result<(ModelParams, GradientLog)> {
    let (params, _, log) = train_with(text, cfg, "", |_| {})?;
    Ok((params, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    Argmax,
    Sample,
}

impl FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(GenerationMode::Argmax),
            "sample" => Ok(GenerationMode::Sample),
            other => Err(Error::Config(format!("unknown generation mode {other:?}"))),
        }
    }
}

/// Feeds `seed_symbol` in from a zero hidden state and then each emitted
/// symbol back as the next input. Returns exactly `length` symbols, not
/// including the seed.
pub fn generate(
    params: &ModelParams,
    vocab: &Vocabulary,
    seed_symbol: char,
    length: usize,
    mode: GenerationMode,
    seed: u64,
) -> Result<String> {
    if length == 0 {
        return Err(Error::Config("generation length must be at least 1".into()));
    }
    if vocab.len() != params.vocab_size() {
        return Err(Error::Dimension(format!(
            "vocabulary has {} symbols, model expects {}",
            vocab.len(),
            params.vocab_size()
        )));
    }
    let mut x = vocab.index_of(seed_symbol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = HiddenState::zeros(params.hidden_size());
    let mut out = String::with_capacity(length);
    for _ in 0..length {
        let step = forward_step(params, &h, x)?;
        x = match mode {
            GenerationMode::Argmax => argmax(&step.probs),
            GenerationMode::Sample => WeightedIndex::new(step.probs.iter())
                .map_err(|e| Error::Config(format!("cannot sample from output: {e}")))?
                .sample(&mut rng),
        };
        out.push(vocab.symbol(x)?);
        h = step.hidden;
    }
    Ok(out)
}

//! Vanilla RNN forward pass.
//!
//! The recurrence is
//!
//! ```text
//! a_t = U·onehot(x_t) + W·h_{t-1}
//! h_t = tanh(a_t)
//! p_t = softmax(V·h_t)
//! L_t = -ln p_t[target_t]
//! ```
//!
//! with no bias terms. All arithmetic is `f64`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// The learned weights: input projection `u` (H×C), recurrent `w` (H×H)
/// and output projection `v` (C×H).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub v: Array2<f64>,
}

impl ModelParams {
    pub fn zeros(hidden: usize, vocab: usize) -> Self {
        Self {
            u: Array2::zeros((hidden, vocab)),
            w: Array2::zeros((hidden, hidden)),
            v: Array2::zeros((vocab, hidden)),
        }
    }

    /// Gaussian entries with mean 0 and standard deviation `scale`, drawn
    /// in the order U, W, V (row-major).
    pub fn random<R: Rng + ?Sized>(hidden: usize, vocab: usize, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, scale).expect("init scale must be finite and non-negative");
        let mut draw = |rows, cols| Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng));
        let u = draw(hidden, vocab);
        let w = draw(hidden, hidden);
        let v = draw(vocab, hidden);
        Self { u, w, v }
    }

    /// Validates shapes before accepting the three matrices.
    pub fn from_matrices(u: Array2<f64>, w: Array2<f64>, v: Array2<f64>) -> Result<Self> {
        let (h, c) = u.dim();
        if w.dim() != (h, h) {
            return Err(Error::Dimension(format!(
                "W is {:?}, expected ({h}, {h})",
                w.dim()
            )));
        }
        if v.dim() != (c, h) {
            return Err(Error::Dimension(format!(
                "V is {:?}, expected ({c}, {h})",
                v.dim()
            )));
        }
        Ok(Self { u, w, v })
    }

    pub fn hidden_size(&self) -> usize {
        self.w.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.u.ncols()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, m) in self.named() {
            if !m.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite { matrix: name });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &Array2<f64>); 3] {
        [("U", &self.u), ("W", &self.w), ("V", &self.v)]
    }
}

/// Hidden state vector. Entries lie strictly inside (-1, 1) after any
/// forward step; the initial state may be anything the caller chooses.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(Array1<f64>);

impl HiddenState {
    pub fn zeros(hidden: usize) -> Self {
        Self(Array1::zeros(hidden))
    }

    pub fn new(values: Array1<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }
}

/// Everything the backward pass needs from one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub input: usize,
    pub pre_activation: Array1<f64>,
    pub hidden: HiddenState,
    pub probs: Array1<f64>,
    pub predicted: usize,
    /// `-ln p[target]`, present when a target was supplied.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub h0: HiddenState,
    pub steps: Vec<StepRecord>,
    pub targets: Vec<usize>,
    pub total_loss: f64,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hidden state entering step `t` (`h0` for `t == 0`).
    pub fn hidden_before(&self, t: usize) -> &HiddenState {
        if t == 0 {
            &self.h0
        } else {
            &self.steps[t - 1].hidden
        }
    }

    pub fn last_hidden(&self) -> &HiddenState {
        self.steps.last().map(|s| &s.hidden).unwrap_or(&self.h0)
    }

    pub fn step_losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.loss.unwrap_or(0.0))
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.predicted).collect()
    }

    pub fn mean_loss(&self) -> f64 {
        self.total_loss / self.len() as f64
    }
}

/// One step of the recurrence. The step's loss is left unset.
pub fn forward_step(params: &ModelParams, h_prev: &HiddenState, x: usize) -> Result<StepRecord> {
    check_dims(params, h_prev)?;
    check_input(params, x)?;
    params.check_finite()?;
    Ok(step_unchecked(params, h_prev.view(), x))
}

pub fn forward_batch(
    params: &ModelParams,
    h0: &HiddenState,
    inputs: &[usize],
    targets: &[usize],
) -> Result<ForwardTrace> {
    if inputs.is_empty() {
        return Err(Error::BatchShape("empty batch".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::BatchShape(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    check_dims(params, h0)?;
    for &s in inputs.iter().chain(targets) {
        check_input(params, s)?;
    }
    params.check_finite()?;

    let mut steps: Vec<StepRecord> = Vec::with_capacity(inputs.len());
    let mut total_loss = 0.0;
    for (t, (&x, &y)) in inputs.iter().zip(targets).enumerate() {
        let h_prev = if t == 0 { h0.view() } else { steps[t - 1].hidden.view() };
        let mut step = step_unchecked(params, h_prev, x);
        let loss = -step.probs[y].ln();
        step.loss = Some(loss);
        total_loss += loss;
        steps.push(step);
    }
    Ok(ForwardTrace {
        h0: h0.clone(),
        steps,
        targets: targets.to_vec(),
        total_loss,
    })
}

/// Numerically stable softmax (max logit subtracted first).
pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.mapv(|z| (z - max).exp());
    let sum = p.sum();
    p /= sum;
    p
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn step_unchecked(params: &ModelParams, h_prev: ArrayView1<'_, f64>, x: usize) -> StepRecord {
    let pre_activation = &params.u.column(x) + &params.w.dot(&h_prev);
    let hidden = pre_activation.mapv(f64::tanh);
    let probs = softmax(&params.v.dot(&hidden));
    let predicted = argmax(&probs);
    StepRecord {
        input: x,
        pre_activation,
        hidden: HiddenState(hidden),
        probs,
        predicted,
        loss: None,
    }
}

fn check_dims(params: &ModelParams, h: &HiddenState) -> Result<()> {
    if h.len() != params.hidden_size() {
        return Err(Error::Dimension(format!(
            "hidden state has length {}, model hidden size is {}",
            h.len(),
            params.hidden_size()
        )));
    }
    Ok(())
}

fn check_input(params: &ModelParams, x: usize) -> Result<()> {
    if x >= params.vocab_size() {
        return Err(Error::IndexOutOfRange {
            index: x,
            size: params.vocab_size(),
        });
    }
    Ok(())
}

//! Backpropagation through time over a [`ForwardTrace`].
//!
//! Two engines produce the same gradient of the batch loss:
//!
//! * [`bptt_standard`] makes one backward pass, carrying the running sum of
//!   every later loss's error signal. `O(n)` in the batch length.
//! * [`bptt_itemized`] walks back separately from every loss origin `t`
//!   and keeps the contribution to `dL/dW` of each `(t, j)` pair, where `j`
//!   is the step at which the recurrent weights were applied. `O(n·k)`
//!   for horizon `k`.
//!
//! Indices are 0-based throughout: origin `t` and step `j` satisfy
//! `j <= t` and `t - j <= k`. The distance `t - j` is what the gradient
//! log stores.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::rnn::{ForwardTrace, ModelParams};

/// Gradients of the total batch loss with respect to each weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub du: Array2<f64>,
    pub dw: Array2<f64>,
    pub dv: Array2<f64>,
}

impl GradientSet {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            du: Array2::zeros(params.u.raw_dim()),
            dw: Array2::zeros(params.w.raw_dim()),
            dv: Array2::zeros(params.v.raw_dim()),
        }
    }

    pub fn named(&self) -> [(&'static str, &Array2<f64>); 3] {
        [("U", &self.du), ("W", &self.dw), ("V", &self.dv)]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Array2<f64>); 3] {
        [("U", &mut self.du), ("W", &mut self.dw), ("V", &mut self.dv)]
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, m)| m.iter().all(|x| x.is_finite()))
    }
}

/// Per-origin decomposition of `dL/dW`.
///
/// `contrib[t][d]` is the contribution of loss `L_t` through step
/// `j = t - d`; it exists for `d <= min(k, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemizedGradients {
    horizon: usize,
    contrib: Vec<Vec<Array2<f64>>>,
    magnitude: Vec<Vec<f64>>,
}

impl ItemizedGradients {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Batch length.
    pub fn len(&self) -> usize {
        self.contrib.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contrib.is_empty()
    }

    /// Number of recorded steps for origin `t`: `min(k, t) + 1`.
    pub fn depth(&self, t: usize) -> usize {
        self.horizon.min(t) + 1
    }

    pub fn contains(&self, t: usize, j: usize) -> bool {
        t < self.len() && j <= t && t - j <= self.horizon
    }

    pub fn contrib(&self, t: usize, j: usize) -> Option<&Array2<f64>> {
        self.contains(t, j).then(|| &self.contrib[t][t - j])
    }

    pub fn magnitude(&self, t: usize, j: usize) -> Option<f64> {
        self.contains(t, j).then(|| self.magnitude[t][t - j])
    }

    /// Magnitudes for origin `t`, ordered by distance `d = 0, 1, ...`.
    pub fn origin_magnitudes(&self, t: usize) -> Option<&[f64]> {
        self.magnitude.get(t).map(Vec::as_slice)
    }

    /// The full origin-major magnitude table.
    pub fn magnitudes(&self) -> &[Vec<f64>] {
        &self.magnitude
    }

    /// Every recorded `(t, j)` pair, origin-major with `j` descending.
    pub fn domain(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |t| (0..self.depth(t)).map(move |d| (t, t - d)))
    }

    /// Sum of all contributions in the fixed reduction order (origins
    /// ascending, distance ascending).
    pub fn summed(&self) -> Array2<f64> {
        let (rows, cols) = self.contrib[0][0].dim();
        let mut total = Array2::zeros((rows, cols));
        for row in &self.contrib {
            for m in row {
                total += m;
            }
        }
        total
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn decay_ratios(&self, t: usize) -> Result<Vec<f64>> {
        decay_ratios(self.origin_row(t)?).map_err(|reason| Error::OriginOutOfDomain {
            origin: t,
            reason,
        })
    }

    pub fn gradient_horizon(&self, t: usize, epsilon: f64) -> Result<usize> {
        gradient_horizon(self.origin_row(t)?, epsilon)
    }

    fn origin_row(&self, t: usize) -> Result<&[f64]> {
        self.origin_magnitudes(t).ok_or_else(|| Error::OriginOutOfDomain {
            origin: t,
            reason: format!("batch has {} origins", self.len()),
        })
    }
}

/// `delta_t = Vᵀ(p_t − onehot(target_t))`, the error signal each loss
/// injects into its own hidden state.
pub fn loss_head_gradients(trace: &ForwardTrace, params: &ModelParams) -> Vec<Array1<f64>> {
    trace
        .steps
        .iter()
        .zip(&trace.targets)
        .map(|(step, &y)| params.v.t().dot(&output_error(&step.probs, y)))
        .collect()
}

/// Single-pass BPTT.
pub fn bptt_standard(trace: &ForwardTrace, params: &ModelParams) -> Result<GradientSet> {
    check_trace(trace, params)?;
    Ok(single_pass(trace, params, true))
}

/// Itemized BPTT with horizon `k`.
///
/// The returned `dw` is the sum of every recorded contribution, so it is
/// the truncated gradient whenever `k < n - 1`. `du` and `dv` are always
/// the exact gradients and match [`bptt_standard`] bit for bit.
pub fn bptt_itemized(
    trace: &ForwardTrace,
    params: &ModelParams,
    horizon: usize,
) -> Result<(GradientSet, ItemizedGradients)> {
    check_trace(trace, params)?;
    let mut grads = single_pass(trace, params, false);

    let n = trace.len();
    let h = params.hidden_size();
    let deltas = loss_head_gradients(trace, params);
    let tanh_grads: Vec<Array1<f64>> = trace
        .steps
        .iter()
        .map(|s| s.hidden.view().mapv(|x| 1.0 - x * x))
        .collect();

    let mut contrib = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    for (t, delta) in deltas.into_iter().enumerate() {
        let depth = horizon.min(t) + 1;
        let mut row = Vec::with_capacity(depth);
        let mut mags = Vec::with_capacity(depth);
        let mut d = delta;
        for dist in 0..depth {
            let j = t - dist;
            let g = &d * &tanh_grads[j];
            let m = outer(&g, trace.hidden_before(j).as_array());
            mags.push(aggregate_magnitude(&m));
            row.push(m);
            if dist + 1 < depth {
                d = params.w.t().dot(&g);
            }
        }
        contrib.push(row);
        magnitude.push(mags);
    }

    let item = ItemizedGradients {
        horizon,
        contrib,
        magnitude,
    };
    grads.dw = if n > 0 { item.summed() } else { Array2::zeros((h, h)) };
    Ok((grads, item))
}

/// Mean absolute entry of a matrix.
pub fn aggregate_magnitude(m: &Array2<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.iter().map(|x| x.abs()).sum::<f64>() / m.len() as f64
}

/// Ratios `mag[d+1] / mag[d]` for a row of magnitudes ordered by distance,
/// i.e. `magnitude(t, j) / magnitude(t, j + 1)` walking `j` back from
/// `t - 1`. A zero denominator gives `+inf`, or `1` when the numerator is
/// also zero.
pub fn decay_ratios(row: &[f64]) -> std::result::Result<Vec<f64>, String> {
    if row.len() < 2 {
        return Err(format!("{} recorded step(s), need at least 2", row.len()));
    }
    Ok(row
        .windows(2)
        .map(|w| match (w[1], w[0]) {
            (num, den) if den == 0.0 && num == 0.0 => 1.0,
            (_, 0.0) => f64::INFINITY,
            (num, den) => num / den,
        })
        .collect())
}

/// Count of consecutive magnitudes, starting at the origin itself, that
/// stay at or above `epsilon`.
pub fn gradient_horizon(row: &[f64], epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(row.iter().take_while(|&&m| m >= epsilon).count())
}

fn output_error(probs: &Array1<f64>, target: usize) -> Array1<f64> {
    let mut e = probs.clone();
    e[target] -= 1.0;
    e
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}

/// `acc += a ⊗ b` without allocating the outer product.
fn add_outer(acc: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (mut row, &ai) in acc.rows_mut().into_iter().zip(a) {
        if ai != 0.0 {
            row.scaled_add(ai, b);
        }
    }
}

/// The backward recursion shared by both engines. `dw` is only filled
/// when `with_dw` is set.
fn single_pass(trace: &ForwardTrace, params: &ModelParams, with_dw: bool) -> GradientSet {
    let mut grads = GradientSet::zeros_like(params);
    let mut carry = Array1::<f64>::zeros(params.hidden_size());
    for t in (0..trace.len()).rev() {
        let step = &trace.steps[t];
        let dy = output_error(&step.probs, trace.targets[t]);
        add_outer(&mut grads.dv, &dy, step.hidden.as_array());
        carry += &params.v.t().dot(&dy);
        let g = &carry * &step.hidden.view().mapv(|x| 1.0 - x * x);
        if with_dw {
            add_outer(&mut grads.dw, &g, trace.hidden_before(t).as_array());
        }
        let mut col = grads.du.column_mut(step.input);
        col += &g;
        carry = params.w.t().dot(&g);
    }
    grads
}

fn check_trace(trace: &ForwardTrace, params: &ModelParams) -> Result<()> {
    if trace.steps.len() != trace.targets.len() {
        return Err(Error::BatchShape(format!(
            "trace has {} steps but {} targets",
            trace.steps.len(),
            trace.targets.len()
        )));
    }
    let (h, c) = (params.hidden_size(), params.vocab_size());
    if trace.h0.len() != h {
        return Err(Error::Dimension(format!(
            "trace hidden size {} does not match model hidden size {h}",
            trace.h0.len()
        )));
    }
    for (t, step) in trace.steps.iter().enumerate() {
        if step.hidden.len() != h || step.probs.len() != c || step.input >= c || trace.targets[t] >= c
        {
            return Err(Error::Dimension(format!(
                "step {t} does not match model dimensions (H={h}, C={c})"
            )));
        }
    }
    Ok(())
}

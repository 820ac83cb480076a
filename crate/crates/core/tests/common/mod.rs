//! Test-only oracles. Nothing here calls into the crate's forward or
//! backward code: the loss is recomputed with plain loops over nested
//! `Vec`s and differentiated numerically.

#![allow(dead_code)]

use gradhorizon::{forward_batch, ForwardTrace, HiddenState, ModelParams};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS: &str = include_str!("../data/corpus.c");

pub type Mat = Vec<Vec<f64>>;

#[derive(Clone)]
pub struct PlainModel {
    pub u: Mat,
    pub w: Mat,
    pub v: Mat,
}

impl PlainModel {
    pub fn from_params(p: &ModelParams) -> Self {
        let conv = |m: &ndarray::Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        Self {
            u: conv(&p.u),
            w: conv(&p.w),
            v: conv(&p.v),
        }
    }

    pub fn matrix_mut(&mut self, which: Which) -> &mut Mat {
        match which {
            Which::U => &mut self.u,
            Which::W => &mut self.w,
            Which::V => &mut self.v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    U,
    W,
    V,
}

/// Per-step losses `-ln softmax(V tanh(U x + W h))[y]`.
pub fn oracle_losses(m: &PlainModel, h0: &[f64], inputs: &[usize], targets: &[usize]) -> Vec<f64> {
    let hn = m.w.len();
    let cn = m.v.len();
    let mut h = h0.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for (&x, &y) in inputs.iter().zip(targets) {
        let mut next = vec![0.0; hn];
        for i in 0..hn {
            let mut a = m.u[i][x];
            for j in 0..hn {
                a += m.w[i][j] * h[j];
            }
            next[i] = a.tanh();
        }
        h = next;
        let mut z = vec![0.0; cn];
        for c in 0..cn {
            for i in 0..hn {
                z[c] += m.v[c][i] * h[i];
            }
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        out.push(lse - z[y]);
    }
    out
}

/// Central difference of `loss(model)` with respect to every entry of one
/// matrix. The realised step `(θ+ε) − (θ−ε)` is used as the divisor.
pub fn central_difference<F>(m: &PlainModel, which: Which, eps: f64, loss: F) -> Mat
where
    F: Fn(&PlainModel) -> f64,
{
    let mut work = m.clone();
    let (rows, cols) = {
        let mat = work.matrix_mut(which);
        (mat.len(), mat[0].len())
    };
    let mut grad = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let orig = work.matrix_mut(which)[i][j];
            let plus = orig + eps;
            let minus = orig - eps;
            work.matrix_mut(which)[i][j] = plus;
            let lp = loss(&work);
            work.matrix_mut(which)[i][j] = minus;
            let lm = loss(&work);
            work.matrix_mut(which)[i][j] = orig;
            grad[i][j] = (lp - lm) / (plus - minus);
        }
    }
    grad
}

/// `|a − n| / max(|a|, |n|, floor)`, maximised over all entries.
pub fn max_relative_error(analytic: &ndarray::Array2<f64>, numeric: &Mat, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in numeric.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            let a = analytic[[i, j]];
            let denom = a.abs().max(n.abs()).max(floor);
            worst = worst.max((a - n).abs() / denom);
        }
    }
    worst
}

pub struct Instance {
    pub params: ModelParams,
    pub h0: Vec<f64>,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    pub trace: ForwardTrace,
}

impl Instance {
    pub fn plain(&self) -> PlainModel {
        PlainModel::from_params(&self.params)
    }
}

/// Random weights with standard deviation `scale`, random symbols and a
/// random non-zero initial hidden state.
pub fn random_instance(h: usize, c: usize, n: usize, scale: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ModelParams::random(h, c, scale, &mut rng);
    let inputs: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let h0: Vec<f64> = (0..h).map(|_| rng.random_range(-0.9..0.9)).collect();
    let trace = forward_batch(&params, &HiddenState::new(Array1::from(h0.clone())), &inputs, &targets).unwrap();
    Instance {
        params,
        h0,
        inputs,
        targets,
        trace,
    }
}

pub fn relative_frobenius(a: &ndarray::Array2<f64>, reference: &ndarray::Array2<f64>) -> f64 {
    let diff = (a - reference).mapv(|x| x * x).sum().sqrt();
    let norm = reference.mapv(|x| x * x).sum().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

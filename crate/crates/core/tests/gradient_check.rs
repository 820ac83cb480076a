mod common;

use common::*;
use gradhorizon::{bptt_itemized, bptt_standard};

const EPS: f64 = 1e-5;
const FLOOR: f64 = 1e-8;

#[test]
fn oracle_loss_agrees_with_forward_pass() {
    for seed in 0..5 {
        let inst = random_instance(8, 12, 6, 0.7, seed);
        let losses = oracle_losses(&inst.plain(), &inst.h0, &inst.inputs, &inst.targets);
        let total: f64 = losses.iter().sum();
        assert!((total - inst.trace.total_loss).abs() <= 1e-10 * total);
        for (a, b) in losses.iter().zip(inst.trace.step_losses()) {
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}

#[test]
fn standard_gradients_match_central_differences() {
    for seed in 100..104 {
        let inst = random_instance(8, 12, 6, 0.7, seed);
        let g = bptt_standard(&inst.trace, &inst.params).unwrap();
        let model = inst.plain();
        let total = |m: &PlainModel| oracle_losses(m, &inst.h0, &inst.inputs, &inst.targets).iter().sum();
        for (which, analytic) in [(Which::U, &g.du), (Which::W, &g.dw), (Which::V, &g.dv)] {
            let numeric = central_difference(&model, which, EPS, total);
            let err = max_relative_error(analytic, &numeric, FLOOR);
            assert!(err < 1e-5, "seed {seed} {which:?}: max relative error {err:e}");
        }
    }
}

#[test]
fn single_origin_contributions_match_central_differences() {
    let n = 5;
    for seed in 200..203 {
        let inst = random_instance(6, 8, n, 0.7, seed);
        let (_, item) = bptt_itemized(&inst.trace, &inst.params, n - 1).unwrap();
        let model = inst.plain();
        for t in [0, n / 2, n - 1] {
            let only_t = |m: &PlainModel| oracle_losses(m, &inst.h0, &inst.inputs, &inst.targets)[t];
            let numeric = central_difference(&model, Which::W, EPS, only_t);
            let mut summed = ndarray::Array2::zeros((6, 6));
            for j in 0..=t {
                summed += item.contrib(t, j).unwrap();
            }
            let err = max_relative_error(&summed, &numeric, FLOOR);
            assert!(err < 1e-5, "seed {seed} origin {t}: max relative error {err:e}");
        }
    }
}

#[test]
fn truncated_origin_sum_differs_from_full_gradient() {
    // With k < t the per-origin sum is only an approximation; check that the
    // dropped terms are exactly the ones beyond the horizon.
    let inst = random_instance(5, 6, 8, 0.7, 9);
    let (_, full) = bptt_itemized(&inst.trace, &inst.params, 7).unwrap();
    let (_, cut) = bptt_itemized(&inst.trace, &inst.params, 2).unwrap();
    for t in 0..8 {
        for j in 0..=t {
            match cut.contrib(t, j) {
                Some(m) => assert_eq!(m, full.contrib(t, j).unwrap()),
                None => assert!(t - j > 2),
            }
        }
    }
}

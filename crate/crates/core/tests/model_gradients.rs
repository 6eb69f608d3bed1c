//! Whole-model gradient checks against central finite differences for both
//! deep architectures, with layer normalization and tied outputs engaged.

use deeprnn_core::fdcheck::{
    check_model_gradients, gradcheck_batch, randomize_params_for_fd, FD_TOL,
};
use deeprnn_core::model::{Direction, Family, ModelSpec, NmtModel, Vocab};

fn spec(family: Family, enc_depth: usize, dec_depth: usize, ln: bool, tie: bool) -> ModelSpec {
    ModelSpec {
        family,
        enc_depth,
        dec_depth,
        embedding_dim: 3,
        hidden_dim: 4,
        src_vocab: 6,
        tgt_vocab: 6,
        tie_output: tie,
        layer_norm: ln,
        direction: Direction::LeftToRight,
    }
}

fn run_check(family: Family, enc_depth: usize, dec_depth: usize, ln: bool, tie: bool, seed: u64) {
    let s = spec(family, enc_depth, dec_depth, ln, tie);
    let mut model = NmtModel::init(s, Vocab::numbered(6), Vocab::numbered(6), seed).unwrap();
    randomize_params_for_fd(&mut model, seed);
    let pairs = gradcheck_batch(6);
    let report = check_model_gradients(&model, &pairs).unwrap();
    assert!(report.probes > 500, "suspiciously few probes: {}", report.probes);
    assert_eq!(
        report.failures, 0,
        "{family:?} ln={ln} tie={tie}: {} of {} probes above {FD_TOL} \
         (worst {} at {:.3e})",
        report.failures, report.probes, report.worst_param, report.max_rel_error
    );
}

#[test]
fn deep_transition_gradients_match_finite_differences() {
    run_check(Family::DeepTransition, 2, 3, true, true, 101);
}

#[test]
fn deep_transition_without_layer_norm() {
    run_check(Family::DeepTransition, 2, 3, false, true, 103);
}

#[test]
fn stacked_gradients_match_finite_differences() {
    run_check(Family::Stacked, 2, 2, true, true, 107);
}

#[test]
fn stacked_untied_without_layer_norm() {
    run_check(Family::Stacked, 2, 2, false, false, 109);
}

#[test]
fn shallow_gradients_match_finite_differences() {
    run_check(Family::Shallow, 1, 2, true, true, 113);
}

//! Beam search, n-best lists, ensembles, right-to-left rescoring and
//! reranking with length normalization.

mod beam;
mod nbest;
mod rerank;
mod score;

pub use beam::{beam_search, BeamParams, Hypothesis, NBestList, Scorer};
pub use nbest::{read_nbest, write_nbest};
pub use rerank::{
    default_alpha_grid, filter_repeated_quotes, length_normalize, rerank, tune_alpha,
    LengthPenalty, RerankParams,
};
pub use score::{
    corpus_nll, ensemble_sequence_logprob, ensemble_token_logprobs, rescore_right_to_left,
};

use crate::error::{Error, Result};

/// Arithmetic mean of member probability distributions.
pub fn ensemble_predict(distributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = distributions.first() else {
        return Err(Error::InvalidArg("ensemble of zero distributions".into()));
    };
    let dim = first.len();
    for d in distributions {
        if d.len() != dim {
            return Err(Error::DimMismatch(format!(
                "ensemble member has {} components, expected {dim}",
                d.len()
            )));
        }
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArg(format!(
                "ensemble member is not a distribution (sums to {sum})"
            )));
        }
    }
    let n = distributions.len() as f64;
    let mut out = vec![0.0; dim];
    for d in distributions {
        for (o, v) in out.iter_mut().zip(d) {
            *o += v / n;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_members_are_a_fixed_point() {
        let d = vec![0.2, 0.3, 0.5];
        let out = ensemble_predict(&[d.clone(), d.clone(), d.clone()]).unwrap();
        for (a, b) in out.iter().zip(&d) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn opposite_certainties_average() {
        let out = ensemble_predict(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn three_random_members_mean_componentwise() {
        let a = vec![0.1, 0.2, 0.7];
        let b = vec![0.5, 0.25, 0.25];
        let c = vec![0.3, 0.3, 0.4];
        let out = ensemble_predict(&[a.clone(), b.clone(), c.clone()]).unwrap();
        for i in 0..3 {
            let want = (a[i] + b[i] + c[i]) / 3.0;
            assert!((out[i] - want).abs() < 1e-15);
        }
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_members_rejected() {
        assert!(ensemble_predict(&[]).is_err());
        assert!(ensemble_predict(&[vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(ensemble_predict(&[vec![0.9, 0.3]]).is_err());
    }
}

//! Moore-Lewis in-domain data selection.

use crate::datapipe::ngram::NgramLM;
use crate::error::{Error, Result};

pub const DEFAULT_LEN_RANGE: (usize, usize) = (10, 80);

#[derive(Debug, Clone)]
pub struct SelectOutcome {
    /// Selected sentences in score order (most in-domain first).
    pub selected: Vec<String>,
    /// Indices of the selected sentences in the candidate list.
    pub indices: Vec<usize>,
    pub eligible: usize,
    /// Set when fewer eligible candidates existed than requested.
    pub truncated: bool,
}

/// Cross-entropy difference score: lower means more in-domain.
pub fn moore_lewis_score(sentence: &str, in_domain: &NgramLM, general: &NgramLM) -> f64 {
    in_domain.cross_entropy(sentence) - general.cross_entropy(sentence)
}

/// Keep the `top_k` lowest-scoring sentences whose token count lies inside
/// `len_range` (inclusive). Ties preserve candidate order. Asking for more
/// than exists returns everything eligible, flagged as truncated.
pub fn moore_lewis_select(
    candidates: &[String],
    in_domain: &NgramLM,
    general: &NgramLM,
    top_k: usize,
    len_range: (usize, usize),
) -> Result<SelectOutcome> {
    if len_range.0 > len_range.1 {
        return Err(Error::InvalidArg(format!(
            "bad length range {}..{}",
            len_range.0, len_range.1
        )));
    }
    let mut scored: Vec<(f64, usize)> = Vec::new();
    for (i, line) in candidates.iter().enumerate() {
        let len = line.split_whitespace().count();
        if len < len_range.0 || len > len_range.1 {
            continue;
        }
        scored.push((moore_lewis_score(line, in_domain, general), i));
    }
    let eligible = scored.len();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let take = top_k.min(eligible);
    let indices: Vec<usize> = scored[..take].iter().map(|&(_, i)| i).collect();
    Ok(SelectOutcome {
        selected: indices.iter().map(|&i| candidates[i].clone()).collect(),
        indices,
        eligible,
        truncated: top_k > eligible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::ngram::train_ngram_lm;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_models_keep_candidate_order() {
        let lm = train_ngram_lm(["x y z"], 1).unwrap();
        let cands = lines(&[
            "a a a a a a a a a a",
            "b b b b b b b b b b",
            "c c c c c c c c c c",
        ]);
        let out = moore_lewis_select(&cands, &lm, &lm, 2, (1, 100)).unwrap();
        assert_eq!(out.indices, vec![0, 1]);
        for line in &cands {
            assert_eq!(moore_lewis_score(line, &lm, &lm), 0.0);
        }
    }

    #[test]
    fn in_domain_text_scores_lower() {
        let dom = train_ngram_lm(["trial results show benefit", "dose response trial"], 2).unwrap();
        let gen = train_ngram_lm(["the match ended in a draw", "markets fell sharply"], 2).unwrap();
        let verbatim = "trial results show benefit".to_string();
        let foreign = "zzz qqq www eee rrr".to_string();
        assert!(
            moore_lewis_score(&verbatim, &dom, &gen) < moore_lewis_score(&foreign, &dom, &gen)
        );
    }

    #[test]
    fn score_antisymmetry_under_model_swap() {
        let a = train_ngram_lm(["p q r", "p p q"], 2).unwrap();
        let b = train_ngram_lm(["x y", "y z x"], 2).unwrap();
        for line in ["p q x", "x x x", "r q p y"] {
            let fwd = moore_lewis_score(line, &a, &b);
            let rev = moore_lewis_score(line, &b, &a);
            assert!((fwd + rev).abs() < 1e-12);
        }
    }

    #[test]
    fn length_restriction_is_never_violated() {
        let lm = train_ngram_lm(["w w w"], 1).unwrap();
        let cands = lines(&[
            "short",
            "w w w w w w w w w w",
            "w w w",
            "w w w w w w w w w w w w",
        ]);
        let out = moore_lewis_select(&cands, &lm, &lm, 10, (10, 11)).unwrap();
        assert_eq!(out.selected, lines(&["w w w w w w w w w w"]));
        assert!(out.truncated);
        assert_eq!(out.eligible, 1);
    }
}

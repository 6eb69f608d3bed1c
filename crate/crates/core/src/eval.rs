//! Corpus BLEU over whitespace tokens of already-processed text.
//!
//! Standard modified n-gram precision with clipping and a corpus-level
//! brevity penalty, single reference per sentence. Orders whose total
//! hypothesis n-gram count is zero (hypotheses shorter than n everywhere)
//! are excluded from the geometric mean; an order with matches zero but a
//! nonzero denominator makes the score zero, as there is no smoothing.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_N: usize = 4;

#[derive(Debug, Clone)]
pub struct BleuReport {
    /// Overall score in [0, 1].
    pub bleu: f64,
    /// Modified precisions p1..p4 as (matched, total) counts.
    pub precisions: Vec<(u64, u64)>,
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuReport {
    pub fn precision(&self, n: usize) -> f64 {
        let (num, den) = self.precisions[n - 1];
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }
}

impl std::fmt::Display for BleuReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "bleu: {:.4}", self.bleu)?;
        for n in 1..=MAX_N {
            let (num, den) = self.precisions[n - 1];
            writeln!(f, "p{n}: {:.4} ({num}/{den})", self.precision(n))?;
        }
        writeln!(f, "brevity_penalty: {:.4}", self.brevity_penalty)?;
        writeln!(f, "hyp_len: {}", self.hyp_len)?;
        write!(f, "ref_len: {}", self.ref_len)
    }
}

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU of hypothesis lines against aligned reference lines.
pub fn corpus_bleu(hypotheses: &[String], references: &[String]) -> Result<BleuReport> {
    corpus_bleu_n(hypotheses, references, MAX_N)
}

fn corpus_bleu_n(hypotheses: &[String], references: &[String], max_n: usize) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArg(format!(
            "bleu: {} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus("bleu: no sentences".into()));
    }

    let mut matched = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;

    for (hyp, rf) in hypotheses.iter().zip(references) {
        let hyp_toks: Vec<&str> = hyp.split_whitespace().collect();
        let ref_toks: Vec<&str> = rf.split_whitespace().collect();
        hyp_len += hyp_toks.len() as u64;
        ref_len += ref_toks.len() as u64;
        for n in 1..=max_n {
            let hc = ngram_counts(&hyp_toks, n);
            let rc = ngram_counts(&ref_toks, n);
            for (gram, c) in &hc {
                total[n - 1] += c;
                let clip = rc.get(gram).copied().unwrap_or(0);
                matched[n - 1] += (*c).min(clip);
            }
        }
    }

    let brevity_penalty = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };

    let mut log_sum = 0.0;
    let mut orders = 0;
    let mut any_zero = false;
    for n in 0..max_n {
        if total[n] == 0 {
            continue;
        }
        orders += 1;
        if matched[n] == 0 {
            any_zero = true;
        } else {
            log_sum += (matched[n] as f64 / total[n] as f64).ln();
        }
    }
    let bleu = if any_zero || orders == 0 {
        0.0
    } else {
        brevity_penalty * (log_sum / orders as f64).exp()
    };

    Ok(BleuReport {
        bleu,
        precisions: matched.into_iter().zip(total).collect(),
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let c = lines(&["the cat sat on the mat", "a quick brown fox"]);
        let r = corpus_bleu(&c, &c).unwrap();
        assert_eq!(r.bleu, 1.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn disjoint_unigrams_score_zero() {
        let h = lines(&["a b c d"]);
        let r = lines(&["e f g h"]);
        assert_eq!(corpus_bleu(&h, &r).unwrap().bleu, 0.0);
    }

    #[test]
    fn hand_trace_short_hypothesis() {
        // hyp "the cat sat" vs ref "the cat sat down":
        // p1 = 3/3, p2 = 2/2, p3 = 1/1, no 4-grams in the hypothesis,
        // BP = exp(1 - 4/3); bleu = exp(-1/3)
        let h = lines(&["the cat sat"]);
        let r = lines(&["the cat sat down"]);
        let rep = corpus_bleu(&h, &r).unwrap();
        assert_eq!(rep.precisions[0], (3, 3));
        assert_eq!(rep.precisions[1], (2, 2));
        assert_eq!(rep.precisions[2], (1, 1));
        assert_eq!(rep.precisions[3], (0, 0));
        let expect = (1.0f64 - 4.0 / 3.0).exp();
        assert!((rep.bleu - expect).abs() < 1e-12);
    }

    #[test]
    fn clipping_limits_repeated_tokens() {
        // "the the the the" against "the cat": only one "the" credits
        let h = lines(&["the the the the"]);
        let r = lines(&["the cat sat down"]);
        let rep = corpus_bleu(&h, &r).unwrap();
        assert_eq!(rep.precisions[0], (1, 4));
        assert_eq!(rep.bleu, 0.0); // p2 = 0/3
    }

    #[test]
    fn mismatched_lengths_and_empty_are_errors() {
        assert!(corpus_bleu(&lines(&["a"]), &lines(&["a", "b"])).is_err());
        assert!(corpus_bleu(&[], &[]).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let h = lines(&["a b c", "d e f g", "h i"]);
        let r = lines(&["a b x", "d e f q", "h i"]);
        let fwd = corpus_bleu(&h, &r).unwrap();
        let hp = lines(&["h i", "a b c", "d e f g"]);
        let rp = lines(&["h i", "a b x", "d e f q"]);
        let per = corpus_bleu(&hp, &rp).unwrap();
        assert_eq!(fwd.bleu, per.bleu);
        assert_eq!(fwd.precisions, per.precisions);
    }

    #[test]
    fn relabeling_invariance() {
        let h = lines(&["a b a c", "c c d"]);
        let r = lines(&["a b c c", "c d d"]);
        let base = corpus_bleu(&h, &r).unwrap();
        // consistent relabel a->w, b->x, c->y, d->z
        let h2 = lines(&["w x w y", "y y z"]);
        let r2 = lines(&["w x y y", "y z z"]);
        let rel = corpus_bleu(&h2, &r2).unwrap();
        assert_eq!(base.bleu, rel.bleu);
    }
}

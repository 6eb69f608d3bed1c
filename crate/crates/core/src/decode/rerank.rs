//! Length normalization, n-best reranking and the repeated-quote filter.

use crate::decode::beam::NBestList;
use crate::error::{Error, Result};
use crate::eval::corpus_bleu;
use crate::model::Vocab;
use crate::subword::detok_marked;

/// Length penalty `lp(n) = ((5 + n)^alpha) / (6^alpha)`; alpha 0 disables it.
#[derive(Debug, Clone, Copy)]
pub struct LengthPenalty {
    pub alpha: f64,
}

impl LengthPenalty {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha >= 0.0, "alpha must be non-negative");
        LengthPenalty { alpha }
    }

    pub fn lp(&self, length: usize) -> f64 {
        debug_assert!(length >= 1, "length penalty needs length >= 1");
        ((5.0 + length as f64) / 6.0).powf(self.alpha)
    }
}

/// Score normalized by the length penalty.
pub fn length_normalize(logprob: f64, length: usize, alpha: f64) -> f64 {
    logprob / LengthPenalty::new(alpha).lp(length)
}

/// Combination weights for reranking: the rerank score is
/// `(1 - r2l_weight) * norm(l2r) + r2l_weight * norm(r2l)`, with scores
/// length-normalized at `alpha` (the l2r side only when `normalize_l2r`).
#[derive(Debug, Clone)]
pub struct RerankParams {
    pub alpha: f64,
    pub r2l_weight: f64,
    /// Whether the forward score is length-normalized before combination.
    pub normalize_l2r: bool,
}

impl Default for RerankParams {
    fn default() -> Self {
        RerankParams {
            alpha: 0.0,
            r2l_weight: 0.5,
            normalize_l2r: true,
        }
    }
}

impl RerankParams {
    pub fn identity() -> Self {
        RerankParams {
            alpha: 0.0,
            r2l_weight: 0.0,
            normalize_l2r: true,
        }
    }
}

/// Stable re-sort of the list by the rerank score, descending. With alpha 0
/// and r2l weight 0 this is the identity permutation.
pub fn rerank(list: &mut NBestList, params: &RerankParams) -> Result<()> {
    let names = list.feature_names.clone();
    let mut scored: Vec<(f64, crate::decode::Hypothesis)> =
        Vec::with_capacity(list.hypotheses.len());
    for hyp in list.hypotheses.drain(..) {
        let s = rerank_score(&names, &hyp, params)?;
        scored.push((s, hyp));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    list.hypotheses = scored.into_iter().map(|(_, h)| h).collect();
    Ok(())
}

fn rerank_score(
    names: &[String],
    hyp: &crate::decode::Hypothesis,
    p: &RerankParams,
) -> Result<f64> {
    let lp = LengthPenalty::new(p.alpha).lp(hyp.length().max(1));
    let feature = |name: &str| -> Option<f64> {
        names
            .iter()
            .position(|n| n == name)
            .map(|i| hyp.features[i])
    };
    let l2r = feature("l2r").unwrap_or(hyp.logprob);
    let norm_l2r = if p.normalize_l2r { l2r / lp } else { l2r };
    if p.r2l_weight == 0.0 {
        return Ok(norm_l2r);
    }
    let r2l = feature("r2l").ok_or_else(|| {
        Error::InvalidArg("rerank with r2l weight > 0 needs the r2l feature".into())
    })?;
    Ok((1.0 - p.r2l_weight) * norm_l2r + p.r2l_weight * (r2l / lp))
}

const QUOTE_CHARS: &[char] = &[
    '"', '\'', '`', '«', '»', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '\u{201e}',
    '\u{201a}',
];

fn quote_fraction(text: &str) -> f64 {
    let mut total = 0usize;
    let mut quotes = 0usize;
    for tok in text.split_whitespace() {
        total += 1;
        if tok.chars().all(|c| QUOTE_CHARS.contains(&c)) {
            quotes += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        quotes as f64 / total as f64
    }
}

/// Drop hypotheses whose detokenized text is mostly quote punctuation
/// (strictly more than half of the tokens). If everything would be dropped
/// the current best survives.
pub fn filter_repeated_quotes(list: &mut NBestList, vocab: &Vocab) {
    let over: Vec<bool> = list
        .hypotheses
        .iter()
        .map(|h| {
            let text = detok_marked(&vocab.decode_ids(h.content()));
            quote_fraction(&text) > 0.5
        })
        .collect();
    if over.iter().all(|&b| b) {
        list.hypotheses.truncate(1);
        return;
    }
    let mut keep = over.iter().map(|&b| !b);
    list.hypotheses.retain(|_| keep.next().unwrap());
}

/// Pick the grid alpha maximizing corpus BLEU of the reranked 1-best
/// hypotheses against the references. Ties go to the earliest grid entry.
pub fn tune_alpha(
    lists: &[NBestList],
    references: &[String],
    grid: &[f64],
    base: &RerankParams,
    vocab: &Vocab,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArg("alpha grid is empty".into()));
    }
    if lists.len() != references.len() {
        return Err(Error::InvalidArg(format!(
            "{} n-best lists vs {} references",
            lists.len(),
            references.len()
        )));
    }
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &alpha in grid {
        let params = RerankParams {
            alpha,
            ..base.clone()
        };
        let mut hyps = Vec::with_capacity(lists.len());
        for list in lists {
            let mut l = list.clone();
            rerank(&mut l, &params)?;
            let text = l
                .best()
                .map(|h| detok_marked(&vocab.decode_ids(h.content())))
                .unwrap_or_default();
            hyps.push(text);
        }
        let bleu = corpus_bleu(&hyps, references)?.bleu;
        if bleu > best.0 {
            best = (bleu, alpha);
        }
    }
    Ok(best.1)
}

/// The default tuning grid 0, 0.1, ..., 1.5.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=15).map(|i| i as f64 / 10.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Hypothesis;

    fn hyp(tokens: Vec<u32>, logprob: f64, features: Vec<f64>) -> Hypothesis {
        Hypothesis {
            tokens,
            logprob,
            model_logprobs: vec![logprob],
            features,
        }
    }

    #[test]
    fn length_penalty_hand_values() {
        assert_eq!(LengthPenalty::new(0.0).lp(37), 1.0);
        assert!((LengthPenalty::new(0.7).lp(1) - 1.0).abs() < 1e-12);
        let lp13 = LengthPenalty::new(0.6).lp(13);
        assert!((lp13 - 3f64.powf(0.6)).abs() < 1e-9, "lp(13,0.6) = {lp13}");
        assert!((length_normalize(-6.0, 13, 0.6) + 6.0 / 3f64.powf(0.6)).abs() < 1e-12);
    }

    #[test]
    fn identity_params_keep_order() {
        let mut list = NBestList {
            sentence_id: 0,
            feature_names: vec!["l2r".into(), "r2l".into()],
            hypotheses: vec![
                hyp(vec![2, 0], -1.0, vec![-1.0, -9.0]),
                hyp(vec![3, 4, 0], -1.5, vec![-1.5, -0.1]),
                hyp(vec![5, 0], -2.0, vec![-2.0, -0.2]),
            ],
        };
        let before: Vec<Vec<u32>> = list.hypotheses.iter().map(|h| h.tokens.clone()).collect();
        rerank(&mut list, &RerankParams::identity()).unwrap();
        let after: Vec<Vec<u32>> = list.hypotheses.iter().map(|h| h.tokens.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn equal_weights_order_by_arithmetic_mean() {
        // alpha 0: scores are plain averages of l2r and r2l
        let mut list = NBestList {
            sentence_id: 0,
            feature_names: vec!["l2r".into(), "r2l".into()],
            hypotheses: vec![
                hyp(vec![2, 0], -1.0, vec![-1.0, -5.0]), // mean -3.0
                hyp(vec![3, 0], -2.0, vec![-2.0, -2.0]), // mean -2.0
                hyp(vec![4, 0], -3.0, vec![-3.0, -0.5]), // mean -1.75
            ],
        };
        let params = RerankParams {
            alpha: 0.0,
            r2l_weight: 0.5,
            normalize_l2r: true,
        };
        rerank(&mut list, &params).unwrap();
        let order: Vec<u32> = list.hypotheses.iter().map(|h| h.tokens[0]).collect();
        assert_eq!(order, vec![4, 3, 2]);
    }

    #[test]
    fn missing_r2l_feature_is_an_error_only_when_used() {
        let mut list = NBestList {
            sentence_id: 0,
            feature_names: vec!["l2r".into()],
            hypotheses: vec![hyp(vec![2, 0], -1.0, vec![-1.0])],
        };
        assert!(rerank(&mut list, &RerankParams::identity()).is_ok());
        let with_r2l = RerankParams {
            alpha: 0.0,
            r2l_weight: 0.5,
            normalize_l2r: true,
        };
        assert!(rerank(&mut list, &with_r2l).is_err());
    }

    #[test]
    fn quote_filter_drops_quote_walls_and_keeps_fallback() {
        let vocab = Vocab::from_corpus(["\" the cat sat"]);
        let quoted = vocab.encode_line("\" \" \" \" \"");
        let normal = vocab.encode_line("the \" cat \" sat");
        let mut list = NBestList {
            sentence_id: 0,
            feature_names: vec!["l2r".into()],
            hypotheses: vec![
                hyp([quoted.clone(), vec![0]].concat(), -1.0, vec![-1.0]),
                hyp([normal.clone(), vec![0]].concat(), -2.0, vec![-2.0]),
            ],
        };
        filter_repeated_quotes(&mut list, &vocab);
        assert_eq!(list.hypotheses.len(), 1);
        assert_eq!(list.hypotheses[0].content(), &normal[..]);

        // all over the threshold: the top hypothesis survives
        let mut all_quotes = NBestList {
            sentence_id: 1,
            feature_names: vec!["l2r".into()],
            hypotheses: vec![
                hyp([quoted.clone(), vec![0]].concat(), -1.0, vec![-1.0]),
                hyp([quoted, vec![0]].concat(), -3.0, vec![-3.0]),
            ],
        };
        filter_repeated_quotes(&mut all_quotes, &vocab);
        assert_eq!(all_quotes.hypotheses.len(), 1);
        assert!((all_quotes.hypotheses[0].logprob + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tune_alpha_trivial_and_long_preference() {
        let vocab = Vocab::from_corpus(["a b c d e f g h"]);
        // longer hypothesis is always the correct one; raw logprob prefers
        // the short one, so only a large alpha can flip the ranking
        let mk_list = |id: usize| NBestList {
            sentence_id: id,
            feature_names: vec!["l2r".into()],
            hypotheses: vec![
                hyp([vocab.encode_line("a b"), vec![0]].concat(), -1.0, vec![-1.0]),
                hyp(
                    [vocab.encode_line("a b c d e f g h"), vec![0]].concat(),
                    -2.0,
                    vec![-2.0],
                ),
            ],
        };
        let lists: Vec<NBestList> = (0..4).map(mk_list).collect();
        let refs: Vec<String> = (0..4).map(|_| "a b c d e f g h".to_string()).collect();
        let base = RerankParams {
            alpha: 0.0,
            r2l_weight: 0.0,
            normalize_l2r: true,
        };

        assert_eq!(tune_alpha(&lists, &refs, &[0.0], &base, &vocab).unwrap(), 0.0);

        let grid = default_alpha_grid();
        let alpha = tune_alpha(&lists, &refs, &grid, &base, &vocab).unwrap();
        // lp(3)/lp(9): flipping needs (14/6)^a > 2, i.e. a > ~0.82
        assert!(alpha >= 0.9, "picked alpha {alpha}");
        assert!(tune_alpha(&lists, &refs, &[], &base, &vocab).is_err());
    }
}

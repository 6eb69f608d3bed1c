//! Additively smoothed n-gram language models for data selection.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

const BOS: &str = "<s>";
const SENT_END: &str = "</s>";
const OOV: &str = "<unk>";

pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// n-gram model with additive smoothing over the training vocabulary plus a
/// reserved unknown symbol. For every context the smoothed probabilities of
/// all vocabulary tokens, the end symbol and the unknown symbol sum to one.
#[derive(Debug, Clone)]
pub struct NgramLM {
    order: usize,
    counts: HashMap<Vec<String>, HashMap<String, u64>>,
    totals: HashMap<Vec<String>, u64>,
    vocab: BTreeSet<String>,
    delta: f64,
}

/// Count n-grams of the given order over the corpus lines.
pub fn train_ngram_lm<'a, I>(lines: I, order: usize) -> Result<NgramLM>
where
    I: IntoIterator<Item = &'a str>,
{
    if order < 1 {
        return Err(Error::InvalidArg("n-gram order must be at least 1".into()));
    }
    let mut lm = NgramLM {
        order,
        counts: HashMap::new(),
        totals: HashMap::new(),
        vocab: BTreeSet::new(),
        delta: DEFAULT_SMOOTHING,
    };
    let mut any = false;
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        any = true;
        for t in &tokens {
            lm.vocab.insert((*t).to_string());
        }
        let padded: Vec<String> = std::iter::repeat(BOS.to_string())
            .take(order - 1)
            .chain(tokens.iter().map(|t| t.to_string()))
            .chain(std::iter::once(SENT_END.to_string()))
            .collect();
        for w in padded.windows(order) {
            let ctx = w[..order - 1].to_vec();
            let tok = w[order - 1].clone();
            *lm.counts.entry(ctx.clone()).or_default().entry(tok).or_insert(0) += 1;
            *lm.totals.entry(ctx).or_insert(0) += 1;
        }
    }
    if !any {
        return Err(Error::EmptyCorpus("n-gram training corpus".into()));
    }
    Ok(lm)
}

impl NgramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Distinct outcome count: vocabulary, end symbol, unknown.
    fn outcomes(&self) -> f64 {
        (self.vocab.len() + 2) as f64
    }

    fn normalize<'a>(&self, token: &'a str) -> &'a str
    where
        'a: 'a,
    {
        if token == SENT_END || self.vocab.contains(token) {
            token
        } else {
            OOV
        }
    }

    /// Smoothed conditional probability of `token` given the context.
    pub fn prob(&self, context: &[String], token: &str) -> f64 {
        let tok = self.normalize(token);
        let (count, total) = match self.counts.get(context) {
            Some(map) => (
                map.get(tok).copied().unwrap_or(0),
                self.totals[context],
            ),
            None => (0, 0),
        };
        (count as f64 + self.delta) / (total as f64 + self.delta * self.outcomes())
    }

    /// Per-token cross-entropy of a sentence in nats, end symbol included.
    pub fn cross_entropy(&self, line: &str) -> f64 {
        let tokens: Vec<String> = line
            .split_whitespace()
            .map(|t| self.normalize(t).to_string())
            .collect();
        let padded: Vec<String> = std::iter::repeat(BOS.to_string())
            .take(self.order - 1)
            .chain(tokens.into_iter())
            .chain(std::iter::once(SENT_END.to_string()))
            .collect();
        let events = padded.len() - (self.order - 1);
        let mut total = 0.0;
        for w in padded.windows(self.order) {
            let ctx = &w[..self.order - 1];
            total -= self.prob(ctx, &w[self.order - 1]).ln();
        }
        total / events as f64
    }

    pub fn perplexity(&self, line: &str) -> f64 {
        self.cross_entropy(line).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unigram_concentrates_on_the_only_token() {
        let lm = train_ngram_lm(["a a a"], 1).unwrap();
        // three outcomes (a, </s>, <unk>); counts: a 3 of 4 events
        let p = lm.prob(&[], "a");
        assert!((p - (3.0 + 0.1) / (4.0 + 0.1 * 3.0)).abs() < 1e-12);
        assert!(p > 0.7);
    }

    #[test]
    fn unseen_token_has_smoothed_mass() {
        let lm = train_ngram_lm(["a b a"], 1).unwrap();
        let p = lm.prob(&[], "zzz");
        assert!(p > 0.0);
        assert!(p < lm.prob(&[], "a"));
    }

    #[test]
    fn probabilities_sum_to_one_per_context() {
        let lm = train_ngram_lm(["a b", "a c", "b a"], 2).unwrap();
        for ctx in [vec!["a".to_string()], vec!["b".to_string()], vec!["q".to_string()]] {
            let mut sum = lm.prob(&ctx, SENT_END) + lm.prob(&ctx, OOV);
            for tok in ["a", "b", "c"] {
                sum += lm.prob(&ctx, tok);
            }
            assert!((sum - 1.0).abs() < 1e-12, "context {ctx:?} sums to {sum}");
        }
    }

    #[test]
    fn bigram_probabilities_match_hand_counts() {
        // corpus: "a b", "a b", "a c"
        // context [a]: b 2, c 1, total 3; vocab {a,b,c} -> 5 outcomes
        let lm = train_ngram_lm(["a b", "a b", "a c"], 2).unwrap();
        let ctx = vec!["a".to_string()];
        let d = DEFAULT_SMOOTHING;
        assert!((lm.prob(&ctx, "b") - (2.0 + d) / (3.0 + d * 5.0)).abs() < 1e-12);
        assert!((lm.prob(&ctx, "c") - (1.0 + d) / (3.0 + d * 5.0)).abs() < 1e-12);
        // sentence-start context: a always opens
        let start = vec![BOS.to_string()];
        assert!((lm.prob(&start, "a") - (3.0 + d) / (3.0 + d * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_and_zero_order_rejected() {
        assert!(train_ngram_lm([], 2).is_err());
        assert!(train_ngram_lm([""], 2).is_err());
        assert!(train_ngram_lm(["a"], 0).is_err());
    }

    #[test]
    fn cross_entropy_prefers_in_distribution_text() {
        let lm = train_ngram_lm(["the cat sat", "the cat ran", "the dog sat"], 2).unwrap();
        assert!(lm.cross_entropy("the cat sat") < lm.cross_entropy("sat dog the"));
        assert!(lm.perplexity("the cat sat") > 1.0);
    }
}

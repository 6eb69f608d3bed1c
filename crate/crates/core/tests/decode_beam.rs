//! Beam search against brute-force enumeration on table-driven models,
//! beam-width monotonicity, ensemble behavior and the Jensen bound.

use std::collections::HashMap;

use deeprnn_core::decode::{beam_search, BeamParams, Scorer};
use deeprnn_core::model::EOS;
use deeprnn_core::rng::rng_for;
use deeprnn_core::tensor::log_mean_exp;
use deeprnn_core::Result;
use rand::Rng;

/// Fixed conditional distribution table over prefixes of non-end tokens.
#[derive(Clone)]
struct TableModel {
    vocab: usize,
    max_len: usize,
    dists: HashMap<Vec<u32>, Vec<f64>>,
}

impl TableModel {
    fn random(vocab: usize, max_len: usize, rng: &mut impl Rng) -> Self {
        let mut dists = HashMap::new();
        let mut prefixes: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for p in &prefixes {
                let weights: Vec<f64> = (0..vocab).map(|_| rng.gen_range(0.05..1.0)).collect();
                let sum: f64 = weights.iter().sum();
                dists.insert(p.clone(), weights.iter().map(|w| w / sum).collect());
                for tok in 1..vocab as u32 {
                    let mut q = p.clone();
                    q.push(tok);
                    next.push(q);
                }
            }
            prefixes = next;
        }
        TableModel {
            vocab,
            max_len,
            dists,
        }
    }

    fn logp(&self, prefix: &[u32], tok: u32) -> f64 {
        self.dists[prefix][tok as usize].ln()
    }
}

impl Scorer for TableModel {
    type Session = ();
    type State = Vec<u32>;

    fn begin(&self, _src: &[u32]) -> Result<((), Vec<u32>)> {
        Ok(((), Vec::new()))
    }

    fn step(&self, _s: &(), state: &Vec<u32>, prev: Option<u32>) -> Result<(Vec<u32>, Vec<f64>)> {
        let mut prefix = state.clone();
        if let Some(p) = prev {
            prefix.push(p);
        }
        let lp = self.dists[&prefix].iter().map(|p| p.ln()).collect();
        Ok((prefix, lp))
    }

    fn vocab_size(&self) -> usize {
        self.vocab
    }
}

/// Exhaustive best completion score: sequences end at the end symbol or are
/// cut at the length cap.
fn exhaustive_best(models: &[TableModel]) -> f64 {
    let vocab = models[0].vocab;
    let max_len = models[0].max_len;
    fn ens(models: &[TableModel], prefix: &[u32], tok: u32) -> f64 {
        let lps: Vec<f64> = models.iter().map(|m| m.logp(prefix, tok)).collect();
        log_mean_exp(&lps)
    }
    fn rec(models: &[TableModel], vocab: usize, max_len: usize, prefix: &mut Vec<u32>, score: f64, best: &mut f64) {
        if prefix.len() == max_len {
            *best = best.max(score);
            return;
        }
        for tok in 0..vocab as u32 {
            let s = score + ens(models, prefix, tok);
            if tok == EOS {
                *best = best.max(s);
            } else {
                prefix.push(tok);
                rec(models, vocab, max_len, prefix, s, best);
                prefix.pop();
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(models, vocab, max_len, &mut Vec::new(), 0.0, &mut best);
    best
}

#[test]
fn full_width_beam_equals_exhaustive_search() {
    let mut rng = rng_for(901, "beam-exhaustive");
    for trial in 0..100 {
        let model = TableModel::random(3, 3, &mut rng);
        let models = [model];
        let list = beam_search(
            &models,
            &[1],
            &BeamParams {
                beam: 27,
                nbest: 1,
                max_len: 3,
            },
            trial,
        )
        .unwrap();
        let got = list.best().unwrap().logprob;
        let want = exhaustive_best(&models);
        assert!(
            (got - want).abs() < 1e-12,
            "trial {trial}: beam {got} vs exhaustive {want}"
        );
    }
}

#[test]
fn beam_width_monotonicity() {
    let mut rng = rng_for(902, "beam-mono");
    for trial in 0..100 {
        let model = TableModel::random(3, 3, &mut rng);
        let models = [model];
        let mut prev = f64::NEG_INFINITY;
        for width in 1..=27 {
            let list = beam_search(
                &models,
                &[1],
                &BeamParams {
                    beam: width,
                    nbest: 1,
                    max_len: 3,
                },
                trial,
            )
            .unwrap();
            let score = list.best().unwrap().logprob;
            assert!(
                score >= prev - 1e-12,
                "trial {trial}: width {width} scored {score} < {prev}"
            );
            prev = score;
        }
    }
}

#[test]
fn beam_one_is_greedy() {
    let mut rng = rng_for(903, "beam-greedy");
    let model = TableModel::random(3, 4, &mut rng);
    let list = beam_search(
        std::slice::from_ref(&model),
        &[1],
        &BeamParams {
            beam: 1,
            nbest: 1,
            max_len: 4,
        },
        0,
    )
    .unwrap();
    // replay greedily
    let mut prefix: Vec<u32> = Vec::new();
    let mut tokens = Vec::new();
    for _ in 0..4 {
        let dist = &model.dists[&prefix];
        let best = (0..dist.len())
            .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
            .unwrap() as u32;
        tokens.push(best);
        if best == EOS {
            break;
        }
        prefix.push(best);
    }
    assert_eq!(list.best().unwrap().tokens, tokens);
}

#[test]
fn identical_ensemble_members_change_nothing() {
    let mut rng = rng_for(904, "beam-idem");
    let model = TableModel::random(3, 3, &mut rng);
    let single = beam_search(
        std::slice::from_ref(&model),
        &[1],
        &BeamParams {
            beam: 8,
            nbest: 8,
            max_len: 3,
        },
        0,
    )
    .unwrap();
    let twins = [model.clone(), model];
    let double = beam_search(
        &twins,
        &[1],
        &BeamParams {
            beam: 8,
            nbest: 8,
            max_len: 3,
        },
        0,
    )
    .unwrap();
    assert_eq!(single.hypotheses.len(), double.hypotheses.len());
    for (a, b) in single.hypotheses.iter().zip(&double.hypotheses) {
        assert_eq!(a.tokens, b.tokens);
        assert!((a.logprob - b.logprob).abs() < 1e-12);
    }
}

#[test]
fn nbest_lists_are_sorted_and_sized() {
    let mut rng = rng_for(905, "beam-sort");
    let model = TableModel::random(3, 3, &mut rng);
    let list = beam_search(
        std::slice::from_ref(&model),
        &[1],
        &BeamParams {
            beam: 27,
            nbest: 10,
            max_len: 3,
        },
        0,
    )
    .unwrap();
    assert_eq!(list.hypotheses.len(), 10);
    for w in list.hypotheses.windows(2) {
        assert!(w[0].logprob >= w[1].logprob);
    }
    // per-model logprobs of a single-model search match the totals
    for h in &list.hypotheses {
        assert!((h.model_logprobs[0] - h.logprob).abs() < 1e-12);
    }
}

#[test]
fn degenerate_beam_arguments_are_errors() {
    let mut rng = rng_for(906, "beam-args");
    let model = TableModel::random(3, 3, &mut rng);
    let p = |beam, nbest| BeamParams {
        beam,
        nbest,
        max_len: 3,
    };
    assert!(beam_search(std::slice::from_ref(&model), &[], &p(4, 1), 0).is_err());
    assert!(beam_search(std::slice::from_ref(&model), &[1], &p(1, 2), 0).is_err());
    assert!(beam_search(std::slice::from_ref(&model), &[1], &p(4, 0), 0).is_err());
    let empty: [TableModel; 0] = [];
    assert!(beam_search(&empty, &[1], &p(4, 1), 0).is_err());
}

#[test]
fn ensemble_jensen_bound_on_table_models() {
    // per token: ln(mean p) >= mean ln p, so the ensemble NLL of any token
    // sequence is at most the mean of member NLLs
    let mut rng = rng_for(907, "beam-jensen");
    for _ in 0..50 {
        let a = TableModel::random(3, 3, &mut rng);
        let b = TableModel::random(3, 3, &mut rng);
        let seq = [1u32, 2];
        let mut ens = 0.0;
        let mut mean_members = 0.0;
        let mut prefix: Vec<u32> = Vec::new();
        for (i, &tok) in seq.iter().chain(std::iter::once(&EOS)).enumerate() {
            let la = a.logp(&prefix, tok);
            let lb = b.logp(&prefix, tok);
            ens += log_mean_exp(&[la, lb]);
            mean_members += (la + lb) / 2.0;
            if i < seq.len() {
                prefix.push(tok);
            }
        }
        assert!(ens >= mean_members - 1e-12);
    }
}

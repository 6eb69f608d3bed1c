//! Length-synchronous beam search over an ensemble of scorers.
//!
//! Hypotheses that emit the end symbol move to a completed pool that is
//! never pruned; live hypotheses compete for `beam` slots each step. At the
//! length cap surviving live hypotheses count as complete.

use crate::error::{Error, Result};
use crate::model::{DecState, EncodedSource, NmtModel, EOS};
use crate::tensor::log_mean_exp;

/// Incremental left-to-right sentence scorer. Implemented by neural models
/// and by table-driven test models.
pub trait Scorer {
    /// Per-sentence context, computed once.
    type Session;
    /// Per-hypothesis recurrent state.
    type State: Clone;

    fn begin(&self, src: &[u32]) -> Result<(Self::Session, Self::State)>;

    /// Next state and log-probabilities over the target vocabulary given
    /// the previously generated token (None on the first step).
    fn step(
        &self,
        session: &Self::Session,
        state: &Self::State,
        prev: Option<u32>,
    ) -> Result<(Self::State, Vec<f64>)>;

    fn vocab_size(&self) -> usize;

    /// Generated tokens in canonical target order. Right-to-left models
    /// reverse their output here.
    fn canonicalize(&self, tokens: Vec<u32>) -> Vec<u32> {
        tokens
    }
}

impl Scorer for NmtModel {
    type Session = EncodedSource;
    type State = DecState;

    fn begin(&self, src: &[u32]) -> Result<(EncodedSource, DecState)> {
        let enc = self.encode_source(src)?;
        let state = self.start_state(&enc);
        Ok((enc, state))
    }

    fn step(
        &self,
        session: &EncodedSource,
        state: &DecState,
        prev: Option<u32>,
    ) -> Result<(DecState, Vec<f64>)> {
        NmtModel::step(self, session, state, prev)
    }

    fn vocab_size(&self) -> usize {
        self.spec.tgt_vocab
    }

    fn canonicalize(&self, tokens: Vec<u32>) -> Vec<u32> {
        match self.spec.direction {
            crate::model::Direction::LeftToRight => tokens,
            crate::model::Direction::RightToLeft => {
                // content is generated reversed; the end symbol stays last
                let terminated = tokens.last() == Some(&EOS);
                let content_len = tokens.len() - usize::from(terminated);
                let mut out: Vec<u32> = tokens[..content_len].iter().rev().copied().collect();
                if terminated {
                    out.push(EOS);
                }
                out
            }
        }
    }
}

/// One candidate translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Canonical-order token ids, including the terminal end symbol when the
    /// hypothesis finished before the length cap.
    pub tokens: Vec<u32>,
    /// Total ensemble log-probability.
    pub logprob: f64,
    /// Total log-probability under each ensemble member.
    pub model_logprobs: Vec<f64>,
    /// Extra reranking features, aligned with the list's feature names.
    pub features: Vec<f64>,
}

impl Hypothesis {
    /// Token count, end symbol included.
    pub fn length(&self) -> usize {
        self.tokens.len()
    }

    pub fn terminated(&self) -> bool {
        self.tokens.last() == Some(&EOS)
    }

    /// Tokens without the terminal end symbol.
    pub fn content(&self) -> &[u32] {
        match self.tokens.split_last() {
            Some((&last, rest)) if last == EOS => rest,
            _ => &self.tokens,
        }
    }
}

/// Ordered candidate list for one source sentence.
#[derive(Debug, Clone)]
pub struct NBestList {
    pub sentence_id: usize,
    pub feature_names: Vec<String>,
    pub hypotheses: Vec<Hypothesis>,
}

impl NBestList {
    pub fn feature(&self, hyp: &Hypothesis, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| hyp.features[i])
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }
}

#[derive(Debug, Clone)]
pub struct BeamParams {
    pub beam: usize,
    pub nbest: usize,
    pub max_len: usize,
}

struct Live<S> {
    tokens: Vec<u32>,
    logprob: f64,
    model_logprobs: Vec<f64>,
    states: Vec<S>,
}

/// Beam search over the arithmetic-mean ensemble of `models`.
pub fn beam_search<S: Scorer>(
    models: &[S],
    src: &[u32],
    params: &BeamParams,
    sentence_id: usize,
) -> Result<NBestList> {
    if models.is_empty() {
        return Err(Error::InvalidArg("beam search needs at least one model".into()));
    }
    if src.is_empty() {
        return Err(Error::InvalidArg("cannot translate an empty source".into()));
    }
    if params.nbest < 1 || params.beam < params.nbest {
        return Err(Error::InvalidArg(format!(
            "need beam >= nbest >= 1, got beam {} nbest {}",
            params.beam, params.nbest
        )));
    }
    let vocab = models[0].vocab_size();
    if models.iter().any(|m| m.vocab_size() != vocab) {
        return Err(Error::VocabMismatch(
            "ensemble members must share the target vocabulary".into(),
        ));
    }

    let mut sessions = Vec::with_capacity(models.len());
    let mut init_states = Vec::with_capacity(models.len());
    for m in models {
        let (sess, st) = m.begin(src)?;
        sessions.push(sess);
        init_states.push(st);
    }

    let mut live = vec![Live::<S::State> {
        tokens: Vec::new(),
        logprob: 0.0,
        model_logprobs: vec![0.0; models.len()],
        states: init_states,
    }];
    let mut completed: Vec<Hypothesis> = Vec::new();

    for _ in 0..params.max_len {
        if live.is_empty() {
            break;
        }
        // candidate = (parent index, token, score); states computed per parent
        let mut stepped: Vec<(Vec<S::State>, Vec<Vec<f64>>)> = Vec::with_capacity(live.len());
        for hyp in &live {
            let prev = hyp.tokens.last().copied();
            let mut states = Vec::with_capacity(models.len());
            let mut logps = Vec::with_capacity(models.len());
            for (m, model) in models.iter().enumerate() {
                let (st, lp) = model.step(&sessions[m], &hyp.states[m], prev)?;
                if lp.len() != vocab {
                    return Err(Error::VocabMismatch(format!(
                        "scorer produced {} log-probs for vocabulary {vocab}",
                        lp.len()
                    )));
                }
                states.push(st);
                logps.push(lp);
            }
            stepped.push((states, logps));
        }

        let mut candidates: Vec<(usize, u32, f64)> = Vec::with_capacity(live.len() * vocab);
        let mut member = vec![0.0; models.len()];
        for (pi, (_, logps)) in stepped.iter().enumerate() {
            for v in 0..vocab as u32 {
                for (mi, lp) in logps.iter().enumerate() {
                    member[mi] = lp[v as usize];
                }
                let ens = log_mean_exp(&member);
                let score = live[pi].logprob + ens;
                if v == EOS {
                    let parent = &live[pi];
                    let mut tokens = parent.tokens.clone();
                    tokens.push(EOS);
                    let model_logprobs = parent
                        .model_logprobs
                        .iter()
                        .zip(logps.iter())
                        .map(|(acc, lp)| acc + lp[EOS as usize])
                        .collect();
                    completed.push(Hypothesis {
                        tokens,
                        logprob: score,
                        model_logprobs,
                        features: Vec::new(),
                    });
                } else {
                    candidates.push((pi, v, score));
                }
            }
        }

        candidates.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
                .then_with(|| a.1.cmp(&b.1))
        });
        candidates.truncate(params.beam);

        let mut next = Vec::with_capacity(candidates.len());
        for (pi, v, score) in candidates {
            let parent = &live[pi];
            let mut tokens = parent.tokens.clone();
            tokens.push(v);
            let model_logprobs = parent
                .model_logprobs
                .iter()
                .zip(stepped[pi].1.iter())
                .map(|(acc, lp)| acc + lp[v as usize])
                .collect();
            next.push(Live {
                tokens,
                logprob: score,
                model_logprobs,
                states: stepped[pi].0.clone(),
            });
        }
        live = next;
    }

    // hypotheses cut off at the cap are complete without an end symbol
    completed.extend(live.into_iter().map(|h| Hypothesis {
        tokens: h.tokens,
        logprob: h.logprob,
        model_logprobs: h.model_logprobs,
        features: Vec::new(),
    }));

    completed.sort_by(|a, b| {
        b.logprob
            .partial_cmp(&a.logprob)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    completed.truncate(params.nbest);

    for hyp in &mut completed {
        hyp.tokens = models[0].canonicalize(std::mem::take(&mut hyp.tokens));
    }

    let mut list = NBestList {
        sentence_id,
        feature_names: vec!["l2r".to_string()],
        hypotheses: completed,
    };
    for hyp in &mut list.hypotheses {
        hyp.features = vec![hyp.logprob];
    }
    Ok(list)
}

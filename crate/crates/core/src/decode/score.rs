//! Teacher-forced sequence scoring: ensemble log-probabilities, held-out
//! corpus NLL and right-to-left rescoring of n-best lists.

use crate::decode::beam::NBestList;
use crate::decode::rerank::{rerank, RerankParams};
use crate::error::{Error, Result};
use crate::model::{Direction, NmtModel, Vocab};
use crate::tensor::log_mean_exp;

/// Per-token ensemble log-probabilities of a canonical-order target: each
/// position scores `ln(mean_m p_m)`.
pub fn ensemble_token_logprobs(
    models: &[NmtModel],
    src: &[u32],
    tgt: &[u32],
) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::InvalidArg("scoring needs at least one model".into()));
    }
    let per_model: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.token_logprobs(src, tgt))
        .collect::<Result<_>>()?;
    let tokens = per_model[0].len();
    let mut out = Vec::with_capacity(tokens);
    let mut member = vec![0.0; models.len()];
    for t in 0..tokens {
        for (mi, lp) in per_model.iter().enumerate() {
            member[mi] = lp[t];
        }
        out.push(log_mean_exp(&member));
    }
    Ok(out)
}

pub fn ensemble_sequence_logprob(models: &[NmtModel], src: &[u32], tgt: &[u32]) -> Result<f64> {
    Ok(ensemble_token_logprobs(models, src, tgt)?.iter().sum())
}

/// Mean per-token negative log-likelihood of the ensemble on a corpus.
/// With a single model this is the usual validation cross-entropy.
pub fn corpus_nll(models: &[NmtModel], pairs: &[(Vec<u32>, Vec<u32>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("corpus NLL over no sentences".into()));
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for (src, tgt) in pairs {
        let lps = ensemble_token_logprobs(models, src, tgt)?;
        total -= lps.iter().sum::<f64>();
        tokens += lps.len();
    }
    Ok(total / tokens as f64)
}

/// Score every hypothesis with the right-to-left ensemble, append the `r2l`
/// feature and re-sort by the rerank score.
///
/// `generator_vocab` is the target vocabulary the lists were produced with;
/// the rescoring models must match it exactly.
pub fn rescore_right_to_left(
    sources: &[Vec<u32>],
    lists: &mut [NBestList],
    r2l_models: &[NmtModel],
    generator_vocab: Option<&Vocab>,
    params: &RerankParams,
) -> Result<()> {
    if r2l_models.is_empty() {
        return Err(Error::InvalidArg("rescoring needs at least one model".into()));
    }
    if sources.len() != lists.len() {
        return Err(Error::InvalidArg(format!(
            "{} sources vs {} n-best lists",
            sources.len(),
            lists.len()
        )));
    }
    for m in r2l_models {
        if m.spec.direction != Direction::RightToLeft {
            return Err(Error::SpecMismatch(
                "rescoring models must be right-to-left".into(),
            ));
        }
        if let Some(v) = generator_vocab {
            if m.tgt_vocab.units() != v.units() {
                return Err(Error::VocabMismatch(
                    "right-to-left model vocabulary differs from the generator's".into(),
                ));
            }
        }
    }

    for (src, list) in sources.iter().zip(lists.iter_mut()) {
        if !list.feature_names.iter().any(|n| n == "r2l") {
            list.feature_names.push("r2l".to_string());
        }
        let idx = list
            .feature_names
            .iter()
            .position(|n| n == "r2l")
            .unwrap();
        for hyp in &mut list.hypotheses {
            // models are direction-aware: pass canonical content, they score
            // the reversal themselves
            let score = ensemble_sequence_logprob(r2l_models, src, hyp.content())?;
            if hyp.features.len() <= idx {
                hyp.features.resize(idx + 1, 0.0);
            }
            hyp.features[idx] = score;
        }
        rerank(list, params)?;
    }
    Ok(())
}

//! Synthetic parallel data: back-translation and copied bitext.

use crate::datapipe::corpus::{ParallelCorpus, Provenance, SentencePair};
use crate::decode::{beam_search, BeamParams};
use crate::error::{Error, Result};
use crate::model::NmtModel;

/// Pair every monolingual line with itself.
pub fn make_copied(mono: &[String]) -> ParallelCorpus {
    ParallelCorpus::new(
        mono.iter()
            .map(|line| SentencePair {
                src: line.clone(),
                tgt: line.clone(),
                tag: Provenance::Copied,
            })
            .collect(),
    )
}

#[derive(Debug)]
pub struct BackTranslateOutcome {
    pub corpus: ParallelCorpus,
    /// Sentences dropped because decoding failed (for example empty lines).
    pub skipped: usize,
}

/// Translate target-language monolingual text into the source language with
/// a reverse ensemble: synthetic source is the 1-best decode, the target is
/// the original line, pairs tagged synthetic.
pub fn back_translate(
    mono: &[String],
    reverse_models: &[NmtModel],
    beam: usize,
    max_len: usize,
) -> Result<BackTranslateOutcome> {
    if reverse_models.is_empty() {
        return Err(Error::InvalidArg(
            "back-translation needs at least one reverse model".into(),
        ));
    }
    let params = BeamParams {
        beam,
        nbest: 1,
        max_len,
    };
    let in_vocab = &reverse_models[0].src_vocab;
    let out_vocab = &reverse_models[0].tgt_vocab;

    let mut pairs = Vec::with_capacity(mono.len());
    let mut skipped = 0usize;
    for (i, line) in mono.iter().enumerate() {
        let ids = in_vocab.encode_line(line);
        if ids.is_empty() {
            skipped += 1;
            continue;
        }
        match beam_search(reverse_models, &ids, &params, i) {
            Ok(list) => match list.best() {
                Some(best) => pairs.push(SentencePair {
                    src: out_vocab.decode_ids(best.content()),
                    tgt: line.clone(),
                    tag: Provenance::Synthetic,
                }),
                None => skipped += 1,
            },
            Err(_) => skipped += 1,
        }
    }
    Ok(BackTranslateOutcome {
        corpus: ParallelCorpus::new(pairs),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copied_pairs_mirror_the_input() {
        let mono = vec!["foo".to_string(), "bar baz".to_string()];
        let c = make_copied(&mono);
        assert_eq!(c.len(), 2);
        for p in &c.pairs {
            assert_eq!(p.src, p.tgt);
            assert_eq!(p.tag, Provenance::Copied);
        }
        assert!(make_copied(&[]).is_empty());
    }
}

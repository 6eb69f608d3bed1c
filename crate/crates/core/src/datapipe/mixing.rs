//! Ratio-based corpus mixing with whole-corpus repetition plus a seeded
//! partial copy for remainders, so realized sizes are exact and reproducible.

use rand::seq::SliceRandom;

use crate::datapipe::corpus::{ParallelCorpus, Provenance, SentencePair};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone)]
pub struct MixComponent {
    pub corpus: ParallelCorpus,
    pub tag: Provenance,
    pub ratio: u32,
}

/// Components to be combined at small integer ratios (1:1, 1:2:2), with
/// over-sampling from the smaller corpora.
#[derive(Debug, Clone, Default)]
pub struct CorpusMix {
    pub components: Vec<MixComponent>,
}

impl CorpusMix {
    pub fn push(&mut self, corpus: ParallelCorpus, tag: Provenance, ratio: u32) {
        self.components.push(MixComponent { corpus, tag, ratio });
    }
}

/// Realized component sizes: `ratio_i * M` with
/// `M = max_j ceil(len_j / ratio_j)`, so the largest ratio-normalized
/// component stays whole and the rest oversample up to proportion.
pub fn realized_sizes(components: &[MixComponent]) -> Vec<usize> {
    let m = components
        .iter()
        .map(|c| (c.corpus.len() + c.ratio as usize - 1) / c.ratio as usize)
        .max()
        .unwrap_or(0);
    components.iter().map(|c| c.ratio as usize * m).collect()
}

/// Materialize the mix: each component repeated whole plus a seeded partial
/// copy for the remainder, tags preserved, order shuffled with the seed.
pub fn mix(mix: &CorpusMix, seed: u64) -> Result<ParallelCorpus> {
    if mix.components.is_empty() {
        return Err(Error::InvalidArg("mix with no components".into()));
    }
    for (i, c) in mix.components.iter().enumerate() {
        if c.ratio == 0 {
            return Err(Error::InvalidArg(format!("component {i} has ratio 0")));
        }
        if c.corpus.is_empty() {
            return Err(Error::EmptyCorpus(format!("mix component {i}")));
        }
    }

    let sizes = realized_sizes(&mix.components);
    let mut out: Vec<SentencePair> = Vec::with_capacity(sizes.iter().sum());
    for (i, (component, &target)) in mix.components.iter().zip(&sizes).enumerate() {
        let n = component.corpus.len();
        let repeats = target / n;
        let remainder = target % n;
        for _ in 0..repeats {
            out.extend(component.corpus.pairs.iter().map(|p| SentencePair {
                tag: component.tag,
                ..p.clone()
            }));
        }
        if remainder > 0 {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng_for(seed, &format!("mix-partial-{i}")));
            for &j in idx.iter().take(remainder) {
                let p = &component.corpus.pairs[j];
                out.push(SentencePair {
                    tag: component.tag,
                    ..p.clone()
                });
            }
        }
    }
    out.shuffle(&mut rng_for(seed, "mix-shuffle"));
    Ok(ParallelCorpus::new(out))
}

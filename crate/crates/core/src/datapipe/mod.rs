//! Corpus synthesis and mixing: back-translation, copied bitext, ratio
//! mixing with oversampling, and Moore-Lewis selection over n-gram models.

mod corpus;
mod mixing;
mod ngram;
mod select;
mod synth;

pub use corpus::{read_lines, write_lines, ParallelCorpus, Provenance, SentencePair};
pub use mixing::{mix, realized_sizes, CorpusMix, MixComponent};
pub use ngram::{train_ngram_lm, NgramLM, DEFAULT_SMOOTHING};
pub use select::{moore_lewis_score, moore_lewis_select, SelectOutcome, DEFAULT_LEN_RANGE};
pub use synth::{back_translate, make_copied, BackTranslateOutcome};

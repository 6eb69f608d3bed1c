//! Joint BPE subword segmentation with vocabulary filtering.
//!
//! Merges are learned over plain character sequences of whitespace tokens;
//! continuation markers (`@@`) exist only in the text representation written
//! by [`render_units`], never in the unit strings the API returns.

mod bpe;
mod io;
mod translit;

pub use bpe::{
    apply_bpe, apply_bpe_with, learn_bpe, learn_bpe_from_words, BpeApplier, MergeTable, Side,
    UnitVocabulary,
};
pub use io::{
    detok_marked, read_merges, read_translit_map, read_vocab, render_units, write_merges,
    write_vocab,
};
pub use translit::{apply_bpe_transliterated, TranslitSegmented, TransliterationMap};

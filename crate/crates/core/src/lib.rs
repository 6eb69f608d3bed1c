//! Desk-scale neural machine translation toolkit.
//!
//! The crate provides the full pipeline behind the `deeprnn` command line
//! tool: BPE subword segmentation with vocabulary filtering, deep recurrent
//! encoder-decoder models (deep transition and stacked families), adam
//! training with early stopping and checkpointing, beam-search decoding with
//! ensembles and right-to-left reranking, corpus synthesis (back-translation,
//! copied bitext, ratio mixing, Moore-Lewis selection) and a corpus BLEU
//! scorer.

pub mod datapipe;
pub mod decode;
pub mod error;
pub mod eval;
pub mod fdcheck;
pub mod model;
pub mod rng;
pub mod subword;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

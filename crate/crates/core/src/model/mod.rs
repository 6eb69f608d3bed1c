//! Sequence-to-sequence architectures: GRU cells, attention, deep transition
//! and stacked encoder/decoders, embeddings and the tied output layer.

pub mod net;
mod params;
mod spec;
mod vocab;

pub use params::{param_layout, Init, ParamDef, ParamStore};
pub use spec::{Direction, Family, ModelSpec};
pub use vocab::{Vocab, EOS, EOS_STR, UNK, UNK_STR};

use std::rc::Rc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tensor::{log_softmax_slice, Tape, Tensor};
use net::{batch_loss_graph, decoder_begin, decoder_step, encode, prepare_attention, Bound};

/// A complete model: architecture, parameters and the two vocabularies.
#[derive(Debug, Clone)]
pub struct NmtModel {
    pub spec: ModelSpec,
    pub params: ParamStore,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
}

/// Precomputed per-sentence decoding context: bidirectional annotations,
/// the annotation half of the attention scores, and the initial carry.
pub struct EncodedSource {
    c_rows: Vec<Rc<Tensor>>,
    pctx: Vec<Rc<Tensor>>,
    init_carry: Vec<Rc<Tensor>>,
}

impl EncodedSource {
    /// Bidirectional annotation rows, one per source position.
    pub fn annotations(&self) -> &[Rc<Tensor>] {
        &self.c_rows
    }
}

/// Recurrent decoder state for one hypothesis. Cloning shares the tensors.
#[derive(Clone)]
pub struct DecState {
    carry: Vec<Rc<Tensor>>,
}

impl NmtModel {
    pub fn new(
        spec: ModelSpec,
        params: ParamStore,
        src_vocab: Vocab,
        tgt_vocab: Vocab,
    ) -> Result<Self> {
        spec.validate()?;
        params.validate_layout(&spec)?;
        if src_vocab.len() != spec.src_vocab || tgt_vocab.len() != spec.tgt_vocab {
            return Err(Error::SpecMismatch(format!(
                "vocabulary sizes {}/{} do not match spec {}/{}",
                src_vocab.len(),
                tgt_vocab.len(),
                spec.src_vocab,
                spec.tgt_vocab
            )));
        }
        Ok(NmtModel {
            spec,
            params,
            src_vocab,
            tgt_vocab,
        })
    }

    /// Fresh model with seeded parameter initialization.
    pub fn init(spec: ModelSpec, src_vocab: Vocab, tgt_vocab: Vocab, seed: u64) -> Result<Self> {
        let params = ParamStore::init(&spec, seed);
        NmtModel::new(spec, params, src_vocab, tgt_vocab)
    }

    /// Mean per-token negative log-likelihood of a batch under teacher
    /// forcing. Targets are in canonical order without the end symbol.
    pub fn batch_loss(&self, pairs: &[(Vec<u32>, Vec<u32>)]) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &self.spec, &self.params);
        let (loss, _) = batch_loss_graph(&mut tape, &bound, pairs)?;
        let v = tape.value(loss).item();
        tape.value(loss).check_finite("batch loss")?;
        Ok(v)
    }

    /// Loss plus gradients for every parameter, in parameter-store order.
    pub fn batch_loss_grads(
        &self,
        pairs: &[(Vec<u32>, Vec<u32>)],
    ) -> Result<(f64, usize, IndexMap<String, Tensor>)> {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &self.spec, &self.params);
        let (loss, tokens) = batch_loss_graph(&mut tape, &bound, pairs)?;
        tape.value(loss).check_finite("batch loss")?;
        let value = tape.value(loss).item();
        let mut grads_by_var = tape.backward(loss)?;
        let mut out = IndexMap::new();
        for (name, _) in self.params.iter() {
            out.insert(name.clone(), grads_by_var.take(bound.var(name)));
        }
        Ok((value, tokens, out))
    }

    /// Log-probability of each target token (end symbol included), teacher
    /// forced. The target is canonical; right-to-left models score its
    /// reversal.
    pub fn token_logprobs(&self, src: &[u32], tgt: &[u32]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &self.spec, &self.params);
        let c_rows = encode(&mut tape, &bound, src)?;
        let attn = prepare_attention(&mut tape, &bound, &c_rows);
        let mut carry = decoder_begin(&mut tape, &bound, &c_rows);
        let ordered = net::model_order(self.spec.direction, tgt);
        let emb_t = bound.var("emb.tgt");
        let mut y_prev = tape.constant(Tensor::zeros(&[self.spec.embedding_dim]));
        let mut logprobs = Vec::with_capacity(ordered.len() + 1);
        for t in 0..=ordered.len() {
            let step = decoder_step(&mut tape, &bound, &attn, &carry, y_prev);
            let target = if t < ordered.len() { ordered[t] } else { EOS };
            let lp = log_softmax_slice(tape.value(step.logits).data());
            logprobs.push(lp[target as usize]);
            carry = step.carry;
            y_prev = tape.embed_row(emb_t, target as usize);
        }
        Ok(logprobs)
    }

    /// Encode a source sentence once for incremental decoding.
    pub fn encode_source(&self, src: &[u32]) -> Result<EncodedSource> {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &self.spec, &self.params);
        let c_vars = encode(&mut tape, &bound, src)?;
        let attn = prepare_attention(&mut tape, &bound, &c_vars);
        let carry = decoder_begin(&mut tape, &bound, &c_vars);
        Ok(EncodedSource {
            c_rows: c_vars.iter().map(|&v| tape.rc_value(v)).collect(),
            pctx: attn.pctx.iter().map(|&v| tape.rc_value(v)).collect(),
            init_carry: carry.iter().map(|&v| tape.rc_value(v)).collect(),
        })
    }

    pub fn start_state(&self, enc: &EncodedSource) -> DecState {
        DecState {
            carry: enc.init_carry.clone(),
        }
    }

    /// One decoder step: previous token (None on the first step) to next
    /// state and the log-probability distribution over the target
    /// vocabulary. Values agree exactly with the training graph.
    pub fn step(
        &self,
        enc: &EncodedSource,
        state: &DecState,
        prev: Option<u32>,
    ) -> Result<(DecState, Vec<f64>)> {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &self.spec, &self.params);
        let attn = net::AttentionCtx {
            c_rows: enc.c_rows.iter().map(|t| tape.leaf(t.clone())).collect(),
            pctx: enc.pctx.iter().map(|t| tape.leaf(t.clone())).collect(),
        };
        let carry: Vec<_> = state.carry.iter().map(|t| tape.leaf(t.clone())).collect();
        let y_prev = match prev {
            Some(tok) => {
                if tok as usize >= self.spec.tgt_vocab {
                    return Err(Error::Decode(format!("token {tok} out of vocabulary")));
                }
                let emb_t = bound.var("emb.tgt");
                tape.embed_row(emb_t, tok as usize)
            }
            None => tape.constant(Tensor::zeros(&[self.spec.embedding_dim])),
        };
        let step = decoder_step(&mut tape, &bound, &attn, &carry, y_prev);
        let logprobs = log_softmax_slice(tape.value(step.logits).data());
        let next = DecState {
            carry: step.carry.iter().map(|&v| tape.rc_value(v)).collect(),
        };
        Ok((next, logprobs))
    }

    /// Total log-probability of a complete target sentence.
    pub fn sequence_logprob(&self, src: &[u32], tgt: &[u32]) -> Result<f64> {
        Ok(self.token_logprobs(src, tgt)?.iter().sum())
    }
}

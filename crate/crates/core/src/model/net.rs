//! Graph builders for the recurrent architectures.
//!
//! Everything here appends to a [`Tape`]; the same builders serve training
//! (one tape per batch, then backward) and inference (one small tape per
//! decode step). Parameter tensors are bound to a tape once via [`Bound`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::params::ParamStore;
use crate::model::spec::{Direction, Family, ModelSpec};
use crate::model::vocab::EOS;
use crate::tensor::{Tape, Tensor, Var, LAYER_NORM_EPS};

/// Parameter store bound to one tape as leaves.
pub struct Bound<'a> {
    pub spec: &'a ModelSpec,
    vars: HashMap<String, Var>,
}

impl<'a> Bound<'a> {
    pub fn new(tape: &mut Tape, spec: &'a ModelSpec, store: &ParamStore) -> Self {
        let vars = store
            .iter()
            .map(|(name, t)| (name.clone(), tape.leaf(t.clone())))
            .collect();
        Bound { spec, vars }
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not bound"))
    }

    fn ln(&self, tape: &mut Tape, x: Var, site: &str) -> Var {
        let g = self.var(&format!("{site}.g"));
        let b = self.var(&format!("{site}.b"));
        tape.layer_norm(x, g, b, LAYER_NORM_EPS)
    }
}

/// One GRU transition. `input` is absent for transitions without external
/// input, whose input-to-hidden products are omitted entirely. With layer
/// normalization every matrix product is normalized before the gate sums and
/// plain biases are dropped (the normalization bias takes their place).
pub fn gru_step(tape: &mut Tape, b: &Bound, prefix: &str, input: Option<Var>, h_prev: Var) -> Var {
    let ln = b.spec.layer_norm;

    let gate_pre = |tape: &mut Tape, gate: &str, gated_rec: Option<Var>| -> Var {
        let u = b.var(&format!("{prefix}.u{gate}"));
        let mut rec = tape.matvec(u, h_prev);
        if ln {
            rec = b.ln(tape, rec, &format!("{prefix}.lnu{gate}"));
        }
        if let Some(r) = gated_rec {
            rec = tape.mul(r, rec);
        }
        let mut total = rec;
        if let Some(x) = input {
            let w = b.var(&format!("{prefix}.w{gate}"));
            let mut inp = tape.matvec(w, x);
            if ln {
                inp = b.ln(tape, inp, &format!("{prefix}.lnw{gate}"));
            }
            total = tape.add(inp, total);
        }
        if !ln {
            let bias = b.var(&format!("{prefix}.b{gate}"));
            total = tape.add(total, bias);
        }
        total
    };

    let z_pre = gate_pre(tape, "z", None);
    let z = tape.sigmoid(z_pre);
    let r_pre = gate_pre(tape, "r", None);
    let r = tape.sigmoid(r_pre);
    let h_pre = gate_pre(tape, "h", Some(r));
    let cand = tape.tanh(h_pre);

    // out = (1 - z) * h_prev + z * cand, written as h_prev + z * (cand - h_prev)
    let neg_h = tape.scale(h_prev, -1.0);
    let diff = tape.add(cand, neg_h);
    let delta = tape.mul(z, diff);
    tape.add(h_prev, delta)
}

/// Source annotations plus the per-position half of the attention score,
/// which only depends on the annotations and is computed once per sentence.
pub struct AttentionCtx {
    pub c_rows: Vec<Var>,
    pub pctx: Vec<Var>,
}

pub fn prepare_attention(tape: &mut Tape, b: &Bound, c_rows: &[Var]) -> AttentionCtx {
    let wc = b.var("attn.wc");
    let pctx = c_rows
        .iter()
        .map(|&c| {
            let t = tape.matvec(wc, c);
            if b.spec.layer_norm {
                b.ln(tape, t, "attn.ln_c")
            } else {
                t
            }
        })
        .collect();
    AttentionCtx {
        c_rows: c_rows.to_vec(),
        pctx,
    }
}

/// Additive attention: scores via a tanh hidden layer, softmax over source
/// positions, context as the weighted annotation sum. Returns (context,
/// attention weights).
pub fn attend(tape: &mut Tape, b: &Bound, attn: &AttentionCtx, state: Var) -> (Var, Var) {
    let ws = b.var("attn.ws");
    let mut ps = tape.matvec(ws, state);
    if b.spec.layer_norm {
        ps = b.ln(tape, ps, "attn.ln_s");
    }
    let v = b.var("attn.v");
    let scores: Vec<Var> = attn
        .pctx
        .iter()
        .map(|&p| {
            let sum = tape.add(ps, p);
            let t = tape.tanh(sum);
            tape.dot(v, t)
        })
        .collect();
    let score_vec = tape.concat(&scores);
    let weights = tape.softmax(score_vec);
    let ctx = tape.weighted_sum(&attn.c_rows, weights);
    (ctx, weights)
}

fn embed_all(tape: &mut Tape, table: Var, ids: &[u32]) -> Vec<Var> {
    ids.iter()
        .map(|&t| tape.embed_row(table, t as usize))
        .collect()
}

/// Bidirectional source annotations for any family.
pub fn encode(tape: &mut Tape, b: &Bound, src: &[u32]) -> Result<Vec<Var>> {
    if src.is_empty() {
        return Err(Error::InvalidArg("cannot encode an empty source".into()));
    }
    match b.spec.family {
        Family::Shallow => Ok(encode_shallow(tape, b, src)),
        Family::DeepTransition => Ok(encode_deep_transition(tape, b, src)),
        Family::Stacked => Ok(encode_stacked(tape, b, src)),
    }
}

fn encode_shallow(tape: &mut Tape, b: &Bound, src: &[u32]) -> Vec<Var> {
    let emb = b.var("emb.src");
    let xs = embed_all(tape, emb, src);
    let n = src.len();
    let h = b.spec.hidden_dim;

    let zero = tape.constant(Tensor::zeros(&[h]));
    let mut fwd = Vec::with_capacity(n);
    let mut state = zero;
    for &x in &xs {
        state = gru_step(tape, b, "enc.fwd.0", Some(x), state);
        fwd.push(state);
    }
    let mut bwd = vec![zero; n];
    state = zero;
    for i in (0..n).rev() {
        state = gru_step(tape, b, "enc.bwd.0", Some(xs[i]), state);
        bwd[i] = state;
    }
    (0..n).map(|i| tape.concat(&[fwd[i], bwd[i]])).collect()
}

/// Recurrence enters only the first transition: the carry for position i is
/// the previous position's deepest state. Transitions above the first have
/// no external input.
fn encode_deep_transition(tape: &mut Tape, b: &Bound, src: &[u32]) -> Vec<Var> {
    let emb = b.var("emb.src");
    let xs = embed_all(tape, emb, src);
    let n = src.len();
    let h = b.spec.hidden_dim;
    let depth = b.spec.enc_depth;
    let zero = tape.constant(Tensor::zeros(&[h]));

    let mut run = |dir: &str, forward: bool| -> Vec<Var> {
        let mut states = vec![zero; n];
        let mut carry = zero;
        let order: Vec<usize> = if forward {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        };
        for i in order {
            let mut s = gru_step(tape, b, &format!("enc.{dir}.0"), Some(xs[i]), carry);
            for k in 1..depth {
                s = gru_step(tape, b, &format!("enc.{dir}.{k}"), None, s);
            }
            states[i] = s;
            carry = s;
        }
        states
    };

    let fwd = run("fwd", true);
    let bwd = run("bwd", false);
    (0..n).map(|i| tape.concat(&[fwd[i], bwd[i]])).collect()
}

/// Stack of recurrent layers in alternating directions with residual
/// connections above the first layer; out-of-range neighbor states are zero.
fn encode_stacked(tape: &mut Tape, b: &Bound, src: &[u32]) -> Vec<Var> {
    let emb = b.var("emb.src");
    let xs = embed_all(tape, emb, src);
    let n = src.len();
    let h = b.spec.hidden_dim;
    let depth = b.spec.enc_depth;
    let zero = tape.constant(Tensor::zeros(&[h]));

    let mut run_stack = |dir: &str, first_forward: bool| -> Vec<Var> {
        let order = |forward: bool| -> Vec<usize> {
            if forward {
                (0..n).collect()
            } else {
                (0..n).rev().collect()
            }
        };
        // layer 0 over embeddings
        let mut word_states = vec![zero; n];
        let mut carry = zero;
        for i in order(first_forward) {
            carry = gru_step(tape, b, &format!("enc.{dir}.0"), Some(xs[i]), carry);
            word_states[i] = carry;
        }
        // higher layers over the word states below, alternating direction
        for j in 1..depth {
            let forward = if j % 2 == 0 {
                first_forward
            } else {
                !first_forward
            };
            let mut layer_states = vec![zero; n];
            carry = zero;
            for i in order(forward) {
                carry = gru_step(tape, b, &format!("enc.{dir}.{j}"), Some(word_states[i]), carry);
                layer_states[i] = carry;
            }
            for i in 0..n {
                word_states[i] = tape.add(layer_states[i], word_states[i]);
            }
        }
        word_states
    };

    let fwd = run_stack("fwd", true);
    let bwd = run_stack("bwd", false);
    (0..n).map(|i| tape.concat(&[fwd[i], bwd[i]])).collect()
}

/// Initial decoder carry: a feed-forward layer over the mean annotation for
/// the base state, zeros for higher stacked layers.
pub fn decoder_begin(tape: &mut Tape, b: &Bound, c_rows: &[Var]) -> Vec<Var> {
    let mean_c = tape.mean_list(c_rows);
    let pre = tape.matvec(b.var("init.w"), mean_c);
    let act = if b.spec.layer_norm {
        b.ln(tape, pre, "init.ln")
    } else {
        let bias = b.var("init.b");
        tape.add(pre, bias)
    };
    let s0 = tape.tanh(act);
    let mut carry = vec![s0];
    if b.spec.family == Family::Stacked {
        let zero = tape.constant(Tensor::zeros(&[b.spec.hidden_dim]));
        carry.extend(std::iter::repeat(zero).take(b.spec.dec_depth - 1));
    }
    carry
}

/// Output of one decoder step.
pub struct StepOut {
    pub carry: Vec<Var>,
    pub logits: Var,
    pub context: Var,
    pub att_weights: Var,
}

/// One target position for any family. `y_prev` is the embedding of the
/// previous target word (a zero vector on the first step).
pub fn decoder_step(
    tape: &mut Tape,
    b: &Bound,
    attn: &AttentionCtx,
    carry: &[Var],
    y_prev: Var,
) -> StepOut {
    // base conditional GRU, shared by all families
    let s1 = gru_step(tape, b, "dec.0", Some(y_prev), carry[0]);
    let (context, att_weights) = attend(tape, b, attn, s1);
    let s2 = gru_step(tape, b, "dec.1", Some(context), s1);

    let (new_carry, top) = match b.spec.family {
        Family::Shallow => (vec![s2], s2),
        Family::DeepTransition => {
            let mut s = s2;
            for k in 2..b.spec.dec_depth {
                s = gru_step(tape, b, &format!("dec.{k}"), None, s);
            }
            (vec![s], s)
        }
        Family::Stacked => {
            // higher layers are simple GRUs over [state below ; context],
            // with residual word states as in the encoder
            let mut new_carry = vec![s2];
            let mut word_state = s2;
            for l in 1..b.spec.dec_depth {
                let inp = tape.concat(&[word_state, context]);
                let hl = gru_step(tape, b, &format!("dec.{}", l + 1), Some(inp), carry[l]);
                new_carry.push(hl);
                word_state = tape.add(hl, word_state);
            }
            (new_carry, word_state)
        }
    };

    let logits = output_logits(tape, b, top, y_prev, context);
    StepOut {
        carry: new_carry,
        logits,
        context,
        att_weights,
    }
}

/// Feed-forward readout over [state; previous embedding; context] followed by
/// the (tied) projection. No normalization on the logits layer.
fn output_logits(tape: &mut Tape, b: &Bound, state: Var, y_prev: Var, context: Var) -> Var {
    let t_in = tape.concat(&[state, y_prev, context]);
    let pre = tape.matvec(b.var("out.w"), t_in);
    let act = if b.spec.layer_norm {
        b.ln(tape, pre, "out.ln")
    } else {
        let bias = b.var("out.b");
        tape.add(pre, bias)
    };
    let hidden = tape.tanh(act);
    let proj = if b.spec.tie_output {
        b.var("emb.tgt")
    } else {
        b.var("out.wv")
    };
    let logits = tape.matvec(proj, hidden);
    let bias = b.var("out.bias");
    tape.add(logits, bias)
}

/// Target ids in the order the model consumes them. Right-to-left models
/// read the reversed content; the end symbol is appended afterwards either
/// way.
pub fn model_order(direction: Direction, tgt: &[u32]) -> Vec<u32> {
    match direction {
        Direction::LeftToRight => tgt.to_vec(),
        Direction::RightToLeft => tgt.iter().rev().copied().collect(),
    }
}

/// Teacher-forced NLL graph for a batch of (source, target) id pairs,
/// targets without the end symbol. Returns the per-token mean loss node and
/// the token count (targets plus one end symbol each).
pub fn batch_loss_graph(
    tape: &mut Tape,
    b: &Bound,
    pairs: &[(Vec<u32>, Vec<u32>)],
) -> Result<(Var, usize)> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("loss over an empty batch".into()));
    }
    let emb_t = b.var("emb.tgt");
    let e = b.spec.embedding_dim;
    let mut nlls = Vec::new();
    for (src, tgt) in pairs {
        let c_rows = encode(tape, b, src)?;
        let attn = prepare_attention(tape, b, &c_rows);
        let mut carry = decoder_begin(tape, b, &c_rows);
        let ordered = model_order(b.spec.direction, tgt);
        let mut y_prev = tape.constant(Tensor::zeros(&[e]));
        for t in 0..=ordered.len() {
            let step = decoder_step(tape, b, &attn, &carry, y_prev);
            let target = if t < ordered.len() { ordered[t] } else { EOS };
            nlls.push(tape.nll_from_logits(step.logits, target as usize));
            carry = step.carry;
            y_prev = tape.embed_row(emb_t, target as usize);
        }
    }
    let total = tape.sum_list(&nlls);
    let mean = tape.scale(total, 1.0 / nlls.len() as f64);
    Ok((mean, nlls.len()))
}

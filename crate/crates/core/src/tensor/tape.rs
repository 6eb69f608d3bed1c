//! Reverse-mode gradient tape over [`Tensor`] values.
//!
//! The tape is append-only, so node indices are already a topological order
//! and the backward sweep is a single reverse pass that visits each node
//! exactly once. Leaves (parameters, inputs) are registered with
//! [`Tape::leaf`]; every op returns a [`Var`] handle into the tape.

use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::tensor::{log_softmax_slice, softmax_slice, Tensor};

static TAPE_IDS: AtomicU64 = AtomicU64::new(1);

/// Handle to a tape node. Only valid for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

struct BackArgs<'a> {
    out: &'a Tensor,
    grad: &'a Tensor,
    parents: &'a [&'a Tensor],
}

type BackFn = Box<dyn Fn(&BackArgs) -> Vec<Tensor>>;

struct Node {
    parents: Vec<usize>,
    back: Option<BackFn>,
}

pub struct Tape {
    id: u64,
    values: Vec<Rc<Tensor>>,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_IDS.fetch_add(1, Ordering::Relaxed),
            values: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Rc<Tensor>, parents: Vec<usize>, back: Option<BackFn>) -> Var {
        let idx = self.values.len();
        self.values.push(value);
        self.nodes.push(Node { parents, back });
        Var { tape: self.id, idx }
    }

    fn ix(&self, v: Var) -> usize {
        debug_assert_eq!(v.tape, self.id, "Var used with a foreign tape");
        v.idx
    }

    /// Register a leaf. The tensor is shared, not copied, so registering a
    /// parameter store is cheap.
    pub fn leaf(&mut self, t: Rc<Tensor>) -> Var {
        self.push(t, Vec::new(), None)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Rc::new(t), Vec::new(), None)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[self.ix(v)]
    }

    /// Shared handle to a node's value; cheap to keep after the tape drops.
    pub fn rc_value(&self, v: Var) -> Rc<Tensor> {
        self.values[self.ix(v)].clone()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.ix(a), self.ix(b));
        let (va, vb) = (&self.values[ai], &self.values[bi]);
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data);
        self.push(
            Rc::new(out),
            vec![ai, bi],
            Some(Box::new(|args: &BackArgs| {
                vec![args.grad.clone(), args.grad.clone()]
            })),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.ix(a), self.ix(b));
        let (va, vb) = (&self.values[ai], &self.values[bi]);
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data);
        self.push(
            Rc::new(out),
            vec![ai, bi],
            Some(Box::new(|args: &BackArgs| {
                let (a, b) = (args.parents[0], args.parents[1]);
                let da = elementwise(args.grad, b, |g, y| g * y);
                let db = elementwise(args.grad, a, |g, x| g * x);
                vec![da, db]
            })),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let ai = self.ix(a);
        let va = &self.values[ai];
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect());
        self.push(
            Rc::new(out),
            vec![ai],
            Some(Box::new(move |args: &BackArgs| {
                vec![Tensor::new(
                    args.grad.shape().to_vec(),
                    args.grad.data().iter().map(|g| g * c).collect(),
                )]
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ai = self.ix(a);
        let va = &self.values[ai];
        let out = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect(),
        );
        self.push(
            Rc::new(out),
            vec![ai],
            Some(Box::new(|args: &BackArgs| {
                vec![elementwise(args.grad, args.out, |g, y| g * y * (1.0 - y))]
            })),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let ai = self.ix(a);
        let va = &self.values[ai];
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x.tanh()).collect());
        self.push(
            Rc::new(out),
            vec![ai],
            Some(Box::new(|args: &BackArgs| {
                vec![elementwise(args.grad, args.out, |g, y| g * (1.0 - y * y))]
            })),
        )
    }

    /// y = W x with W a (m x n) matrix and x an n-vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (wi, xi) = (self.ix(w), self.ix(x));
        let (vw, vx) = (&self.values[wi], &self.values[xi]);
        assert_eq!(vw.shape().len(), 2, "matvec expects a matrix");
        assert_eq!(vw.shape()[1], vx.len(), "matvec dimension mismatch");
        let out = Tensor::vector(super::matvec(vw, vx.data()));
        self.push(
            Rc::new(out),
            vec![wi, xi],
            Some(Box::new(|args: &BackArgs| {
                let (w, x) = (args.parents[0], args.parents[1]);
                let (m, n) = (w.shape()[0], w.shape()[1]);
                let g = args.grad.data();
                let mut dw = vec![0.0; m * n];
                for i in 0..m {
                    let gi = g[i];
                    let row = &mut dw[i * n..(i + 1) * n];
                    for (j, rj) in row.iter_mut().enumerate() {
                        *rj = gi * x.data()[j];
                    }
                }
                let dx = super::matvec_t(w, g);
                vec![Tensor::matrix(m, n, dw), Tensor::vector(dx)]
            })),
        )
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (ai, bi) = (self.ix(a), self.ix(b));
        let (va, vb) = (&self.values[ai], &self.values[bi]);
        assert_eq!(va.len(), vb.len(), "dot dimension mismatch");
        let s: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
        self.push(
            Rc::new(Tensor::scalar(s)),
            vec![ai, bi],
            Some(Box::new(|args: &BackArgs| {
                let g = args.grad.item();
                let (a, b) = (args.parents[0], args.parents[1]);
                vec![
                    Tensor::vector(b.data().iter().map(|y| g * y).collect()),
                    Tensor::vector(a.data().iter().map(|x| g * x).collect()),
                ]
            })),
        )
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let idxs: Vec<usize> = parts.iter().map(|p| self.ix(*p)).collect();
        let lens: Vec<usize> = idxs.iter().map(|&i| self.values[i].len()).collect();
        let mut data = Vec::with_capacity(lens.iter().sum());
        for &i in &idxs {
            data.extend_from_slice(self.values[i].data());
        }
        self.push(
            Rc::new(Tensor::vector(data)),
            idxs,
            Some(Box::new(move |args: &BackArgs| {
                let g = args.grad.data();
                let mut out = Vec::with_capacity(lens.len());
                let mut off = 0;
                for &l in &lens {
                    out.push(Tensor::vector(g[off..off + l].to_vec()));
                    off += l;
                }
                out
            })),
        )
    }

    /// Row lookup into a (rows x cols) table; the embedding op.
    pub fn embed_row(&mut self, table: Var, row: usize) -> Var {
        let ti = self.ix(table);
        let vt = &self.values[ti];
        assert_eq!(vt.shape().len(), 2, "embed_row expects a matrix");
        assert!(row < vt.shape()[0], "embedding row out of range");
        let out = Tensor::vector(vt.row(row).to_vec());
        self.push(
            Rc::new(out),
            vec![ti],
            Some(Box::new(move |args: &BackArgs| {
                let t = args.parents[0];
                let mut dt = Tensor::zeros(t.shape());
                dt.row_mut(row).copy_from_slice(args.grad.data());
                vec![dt]
            })),
        )
    }

    /// Layer normalization with learned gain and bias:
    /// `y = gain * (x - mean) / sqrt(var + eps) + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let (xi, gi, bi) = (self.ix(x), self.ix(gain), self.ix(bias));
        let (vx, vg, vb) = (&self.values[xi], &self.values[gi], &self.values[bi]);
        let n = vx.len();
        assert_eq!(vg.len(), n, "layer_norm gain dimension mismatch");
        assert_eq!(vb.len(), n, "layer_norm bias dimension mismatch");
        let (xhat, _) = normalize(vx.data(), eps);
        let data: Vec<f64> = xhat
            .iter()
            .zip(vg.data())
            .zip(vb.data())
            .map(|((xh, g), b)| g * xh + b)
            .collect();
        self.push(
            Rc::new(Tensor::vector(data)),
            vec![xi, gi, bi],
            Some(Box::new(move |args: &BackArgs| {
                let x = args.parents[0];
                let gain = args.parents[1];
                let g = args.grad.data();
                let n = x.len() as f64;
                let (xhat, inv_std) = normalize(x.data(), eps);
                // u = gain .* grad; dx = (u - mean(u) - xhat * mean(u .* xhat)) / std
                let u: Vec<f64> = gain.data().iter().zip(g).map(|(gn, gr)| gn * gr).collect();
                let mean_u = u.iter().sum::<f64>() / n;
                let mean_ux = u.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                let dx: Vec<f64> = u
                    .iter()
                    .zip(&xhat)
                    .map(|(ui, xh)| (ui - mean_u - xh * mean_ux) * inv_std)
                    .collect();
                let dgain: Vec<f64> = g.iter().zip(&xhat).map(|(gr, xh)| gr * xh).collect();
                vec![
                    Tensor::vector(dx),
                    Tensor::vector(dgain),
                    Tensor::vector(g.to_vec()),
                ]
            })),
        )
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let ai = self.ix(a);
        let out = Tensor::vector(softmax_slice(self.values[ai].data()));
        self.push(
            Rc::new(out),
            vec![ai],
            Some(Box::new(|args: &BackArgs| {
                let y = args.out.data();
                let g = args.grad.data();
                let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                vec![Tensor::vector(
                    y.iter().zip(g).map(|(yi, gi)| yi * (gi - gy)).collect(),
                )]
            })),
        )
    }

    /// Negative log-likelihood of `target` under softmax(logits); the fused
    /// loss op, so the logits layer itself carries no normalization.
    pub fn nll_from_logits(&mut self, logits: Var, target: usize) -> Var {
        let li = self.ix(logits);
        let vl = &self.values[li];
        assert!(target < vl.len(), "nll target out of range");
        let logp = log_softmax_slice(vl.data());
        let out = Tensor::scalar(-logp[target]);
        self.push(
            Rc::new(out),
            vec![li],
            Some(Box::new(move |args: &BackArgs| {
                let g = args.grad.item();
                let mut d = softmax_slice(args.parents[0].data());
                d[target] -= 1.0;
                for v in &mut d {
                    *v *= g;
                }
                vec![Tensor::vector(d)]
            })),
        )
    }

    /// out = sum_i weights[i] * rows[i].
    pub fn weighted_sum(&mut self, rows: &[Var], weights: Var) -> Var {
        assert!(!rows.is_empty());
        let wi = self.ix(weights);
        let ridx: Vec<usize> = rows.iter().map(|r| self.ix(*r)).collect();
        let n = ridx.len();
        assert_eq!(self.values[wi].len(), n, "weighted_sum weight count mismatch");
        let dim = self.values[ridx[0]].len();
        let mut data = vec![0.0; dim];
        for (k, &ri) in ridx.iter().enumerate() {
            let w = self.values[wi].data()[k];
            for (d, v) in data.iter_mut().zip(self.values[ri].data()) {
                *d += w * v;
            }
        }
        let mut parents = ridx;
        parents.push(wi);
        self.push(
            Rc::new(Tensor::vector(data)),
            parents,
            Some(Box::new(move |args: &BackArgs| {
                let g = args.grad.data();
                let w = args.parents[n].data();
                let mut out: Vec<Tensor> = Vec::with_capacity(n + 1);
                for k in 0..n {
                    out.push(Tensor::vector(g.iter().map(|gi| w[k] * gi).collect()));
                }
                let dw: Vec<f64> = (0..n)
                    .map(|k| {
                        args.parents[k]
                            .data()
                            .iter()
                            .zip(g)
                            .map(|(r, gi)| r * gi)
                            .sum()
                    })
                    .collect();
                out.push(Tensor::vector(dw));
                out
            })),
        )
    }

    /// Elementwise sum of same-shaped vars.
    pub fn sum_list(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let idxs: Vec<usize> = xs.iter().map(|x| self.ix(*x)).collect();
        let shape = self.values[idxs[0]].shape().to_vec();
        let mut data = vec![0.0; self.values[idxs[0]].len()];
        for &i in &idxs {
            assert_eq!(self.values[i].shape(), &shape[..], "sum_list shape mismatch");
            for (d, v) in data.iter_mut().zip(self.values[i].data()) {
                *d += v;
            }
        }
        let n = idxs.len();
        self.push(
            Rc::new(Tensor::new(shape, data)),
            idxs,
            Some(Box::new(move |args: &BackArgs| {
                vec![args.grad.clone(); n]
            })),
        )
    }

    /// Mean of same-shaped vars.
    pub fn mean_list(&mut self, xs: &[Var]) -> Var {
        let s = self.sum_list(xs);
        self.scale(s, 1.0 / xs.len() as f64)
    }

    /// Reverse sweep from a scalar loss. Nodes unreachable from the loss
    /// receive no gradient; [`Gradients::get`] reports zeros for them.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let li = self.ix(loss);
        if self.values[li].len() != 1 {
            return Err(Error::DimMismatch(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.values[li].shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.values.len()).map(|_| None).collect();
        grads[li] = Some(Tensor::scalar(1.0));
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Some(back) = &self.nodes[i].back {
                let parent_vals: Vec<&Tensor> = self.nodes[i]
                    .parents
                    .iter()
                    .map(|&p| self.values[p].as_ref())
                    .collect();
                let contribs = back(&BackArgs {
                    out: &self.values[i],
                    grad: &g,
                    parents: &parent_vals,
                });
                debug_assert_eq!(contribs.len(), self.nodes[i].parents.len());
                for (&p, c) in self.nodes[i].parents.iter().zip(contribs) {
                    match &mut grads[p] {
                        Some(t) => add_into(t, &c),
                        slot => *slot = Some(c),
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape_id: self.id,
            grads,
            shapes: self.values.iter().map(|v| v.shape().to_vec()).collect(),
        })
    }
}

/// Accumulated gradients from one backward sweep.
pub struct Gradients {
    tape_id: u64,
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for a var; zeros if the var did not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        debug_assert_eq!(v.tape, self.tape_id);
        match &self.grads[v.idx] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.idx]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        debug_assert_eq!(v.tape, self.tape_id);
        self.grads[v.idx]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.idx]))
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect(),
    )
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
}

fn normalize(x: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}

use std::rc::Rc;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::spec::{Family, ModelSpec};
use crate::rng::{rng_for, Rng as SeededRng};
use crate::tensor::Tensor;

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in [-a, a].
    Uniform(f64),
    /// Orthogonal rows (square recurrent matrices).
    Orthogonal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
pub struct ParamDef {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

const EMB_SCALE: f64 = 0.05;

fn gru_defs(defs: &mut Vec<ParamDef>, prefix: &str, input_dim: Option<usize>, hidden: usize, ln: bool) {
    let gates = ["z", "r", "h"];
    for g in gates {
        if let Some(ind) = input_dim {
            defs.push(ParamDef {
                name: format!("{prefix}.w{g}"),
                shape: vec![hidden, ind],
                init: Init::Uniform(EMB_SCALE),
            });
        }
        defs.push(ParamDef {
            name: format!("{prefix}.u{g}"),
            shape: vec![hidden, hidden],
            init: Init::Orthogonal,
        });
        if ln {
            if input_dim.is_some() {
                defs.push(ParamDef {
                    name: format!("{prefix}.lnw{g}.g"),
                    shape: vec![hidden],
                    init: Init::Ones,
                });
                defs.push(ParamDef {
                    name: format!("{prefix}.lnw{g}.b"),
                    shape: vec![hidden],
                    init: Init::Zeros,
                });
            }
            defs.push(ParamDef {
                name: format!("{prefix}.lnu{g}.g"),
                shape: vec![hidden],
                init: Init::Ones,
            });
            defs.push(ParamDef {
                name: format!("{prefix}.lnu{g}.b"),
                shape: vec![hidden],
                init: Init::Zeros,
            });
        } else {
            defs.push(ParamDef {
                name: format!("{prefix}.b{g}"),
                shape: vec![hidden],
                init: Init::Zeros,
            });
        }
    }
}

fn ff_defs(defs: &mut Vec<ParamDef>, prefix: &str, out_dim: usize, in_dim: usize, ln: bool) {
    defs.push(ParamDef {
        name: format!("{prefix}.w"),
        shape: vec![out_dim, in_dim],
        init: Init::Uniform(EMB_SCALE),
    });
    if ln {
        defs.push(ParamDef {
            name: format!("{prefix}.ln.g"),
            shape: vec![out_dim],
            init: Init::Ones,
        });
        defs.push(ParamDef {
            name: format!("{prefix}.ln.b"),
            shape: vec![out_dim],
            init: Init::Zeros,
        });
    } else {
        defs.push(ParamDef {
            name: format!("{prefix}.b"),
            shape: vec![out_dim],
            init: Init::Zeros,
        });
    }
}

/// Complete, ordered parameter layout for a spec. Families share names for
/// the cells they have in common, so degenerate configurations (deep
/// transition 1/2, stacked 1) bind the very same tensors as the shallow
/// baseline.
pub fn param_layout(spec: &ModelSpec) -> Vec<ParamDef> {
    let e = spec.embedding_dim;
    let h = spec.hidden_dim;
    let ln = spec.layer_norm;
    let mut defs = Vec::new();

    defs.push(ParamDef {
        name: "emb.src".into(),
        shape: vec![spec.src_vocab, e],
        init: Init::Uniform(EMB_SCALE),
    });
    defs.push(ParamDef {
        name: "emb.tgt".into(),
        shape: vec![spec.tgt_vocab, e],
        init: Init::Uniform(EMB_SCALE),
    });

    for dir in ["fwd", "bwd"] {
        for i in 0..spec.enc_depth {
            let input = match (spec.family, i) {
                (_, 0) => Some(e),
                (Family::Stacked, _) => Some(h),
                _ => None,
            };
            gru_defs(&mut defs, &format!("enc.{dir}.{i}"), input, h, ln);
        }
    }

    for i in 0..spec.decoder_cells() {
        let input = match (spec.family, i) {
            (_, 0) => Some(e),
            (_, 1) => Some(2 * h),
            (Family::Stacked, _) => Some(h + 2 * h),
            _ => None,
        };
        gru_defs(&mut defs, &format!("dec.{i}"), input, h, ln);
    }

    // attention: additive scoring over the bidirectional annotations
    defs.push(ParamDef {
        name: "attn.ws".into(),
        shape: vec![h, h],
        init: Init::Uniform(EMB_SCALE),
    });
    defs.push(ParamDef {
        name: "attn.wc".into(),
        shape: vec![h, 2 * h],
        init: Init::Uniform(EMB_SCALE),
    });
    defs.push(ParamDef {
        name: "attn.v".into(),
        shape: vec![h],
        init: Init::Uniform(EMB_SCALE),
    });
    if ln {
        for side in ["s", "c"] {
            defs.push(ParamDef {
                name: format!("attn.ln_{side}.g"),
                shape: vec![h],
                init: Init::Ones,
            });
            defs.push(ParamDef {
                name: format!("attn.ln_{side}.b"),
                shape: vec![h],
                init: Init::Zeros,
            });
        }
    }

    // decoder initial state from the mean annotation
    ff_defs(&mut defs, "init", h, 2 * h, ln);

    // output network over [state; previous embedding; context]
    ff_defs(&mut defs, "out", e, h + e + 2 * h, ln);
    if !spec.tie_output {
        defs.push(ParamDef {
            name: "out.wv".into(),
            shape: vec![spec.tgt_vocab, e],
            init: Init::Uniform(EMB_SCALE),
        });
    }
    defs.push(ParamDef {
        name: "out.bias".into(),
        shape: vec![spec.tgt_vocab],
        init: Init::Zeros,
    });

    defs
}

/// Named parameter tensors in layout order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    tensors: IndexMap<String, Rc<Tensor>>,
}

impl ParamStore {
    /// Seeded initialization following the layout.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = rng_for(seed, "param-init");
        let mut tensors = IndexMap::new();
        for def in param_layout(spec) {
            let t = init_tensor(&def, &mut rng);
            tensors.insert(def.name, Rc::new(t));
        }
        ParamStore { tensors }
    }

    pub fn from_tensors(tensors: IndexMap<String, Rc<Tensor>>) -> Self {
        ParamStore { tensors }
    }

    pub fn get(&self, name: &str) -> &Rc<Tensor> {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter `{name}`"))
    }

    pub fn try_get(&self, name: &str) -> Option<&Rc<Tensor>> {
        self.tensors.get(name)
    }

    pub fn set(&mut self, name: &str, t: Tensor) {
        match self.tensors.get_mut(name) {
            Some(slot) => *slot = Rc::new(t),
            None => panic!("setting unknown parameter `{name}`"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rc<Tensor>)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar parameter count.
    pub fn total_values(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Structural equality of names, shapes and values.
    pub fn bitwise_eq(&self, other: &ParamStore) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(other.tensors.iter()).all(|(a, b)| {
                a.0 == b.0 && a.1.shape() == b.1.shape() && a.1.data() == b.1.data()
            })
    }

    /// Checks that this store matches the layout of `spec` exactly.
    pub fn validate_layout(&self, spec: &ModelSpec) -> Result<()> {
        let layout = param_layout(spec);
        if layout.len() != self.tensors.len() {
            return Err(Error::SpecMismatch(format!(
                "parameter count {} does not match spec layout {}",
                self.tensors.len(),
                layout.len()
            )));
        }
        for def in &layout {
            let t = self.tensors.get(&def.name).ok_or_else(|| {
                Error::SpecMismatch(format!("missing parameter `{}`", def.name))
            })?;
            if t.shape() != def.shape.as_slice() {
                return Err(Error::SpecMismatch(format!(
                    "parameter `{}` has shape {:?}, spec wants {:?}",
                    def.name,
                    t.shape(),
                    def.shape
                )));
            }
        }
        Ok(())
    }
}

fn init_tensor(def: &ParamDef, rng: &mut SeededRng) -> Tensor {
    let n: usize = def.shape.iter().product();
    match def.init {
        Init::Zeros => Tensor::new(def.shape.clone(), vec![0.0; n]),
        Init::Ones => Tensor::new(def.shape.clone(), vec![1.0; n]),
        Init::Uniform(a) => Tensor::new(
            def.shape.clone(),
            (0..n).map(|_| rng.gen_range(-a..a)).collect(),
        ),
        Init::Orthogonal => orthogonal(&def.shape, rng),
    }
}

/// Orthonormal rows via modified Gram-Schmidt on a Gaussian matrix.
fn orthogonal(shape: &[usize], rng: &mut SeededRng) -> Tensor {
    assert_eq!(shape.len(), 2);
    assert_eq!(shape[0], shape[1], "orthogonal init expects a square matrix");
    let n = shape[0];
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = rows.split_at_mut(i);
            for (v, q) in tail[0].iter_mut().zip(&head[j]) {
                *v -= dot * q;
            }
        }
        let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 1e-8, "degenerate sample during orthogonal init");
        for v in &mut rows[i] {
            *v /= norm;
        }
    }
    Tensor::matrix(n, n, rows.into_iter().flatten().collect())
}

//! Checkpoint container: a text header (spec, vocabularies, counters,
//! validation history, optimizer scalars) followed by named raw tensors as
//! `tensor <name> f64 <d0>x<d1>` lines with little-endian payloads.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::rc::Rc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NmtModel, ParamStore, Vocab};
use crate::tensor::Tensor;
use crate::train::adam::AdamState;

const MAGIC: &str = "#nmtckpt v1";

/// One validation save-point.
#[derive(Debug, Clone, PartialEq)]
pub struct SavePoint {
    pub updates: u64,
    pub cross_entropy: f64,
    /// Selection metric (validation BLEU by default; negative cross-entropy
    /// when configured for speed).
    pub metric: f64,
    /// Identifies the validation set in use; changes when a resume swaps it.
    pub valid_tag: String,
    /// Training phase (fine-tuned regime bumps this on the corpus switch).
    pub phase: u32,
}

/// Serialized training state: parameters, optimizer moments, counters and
/// the validation history.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub src_vocab: Vocab,
    pub tgt_vocab: Vocab,
    pub params: ParamStore,
    pub adam: AdamState,
    pub update_count: u64,
    pub history: Vec<SavePoint>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<NmtModel> {
        NmtModel::new(
            self.spec.clone(),
            self.params.clone(),
            self.src_vocab.clone(),
            self.tgt_vocab.clone(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);

        let mut header = String::new();
        header.push_str(MAGIC);
        header.push('\n');
        for line in self.spec.to_kv_block().lines() {
            header.push_str("spec.");
            header.push_str(line);
            header.push('\n');
        }
        header.push_str(&format!("update_count={}\n", self.update_count));
        header.push_str(&format!("adam.t={}\n", self.adam.t));
        header.push_str(&format!("adam.beta1={}\n", fmt_f64(self.adam.beta1)));
        header.push_str(&format!("adam.beta2={}\n", fmt_f64(self.adam.beta2)));
        header.push_str(&format!("adam.eps={}\n", fmt_f64(self.adam.eps)));
        header.push_str(&format!("history.len={}\n", self.history.len()));
        for (i, sp) in self.history.iter().enumerate() {
            header.push_str(&format!("history.{i}.updates={}\n", sp.updates));
            header.push_str(&format!(
                "history.{i}.cross_entropy={}\n",
                fmt_f64(sp.cross_entropy)
            ));
            header.push_str(&format!("history.{i}.metric={}\n", fmt_f64(sp.metric)));
            header.push_str(&format!("history.{i}.valid_tag={}\n", sp.valid_tag));
            header.push_str(&format!("history.{i}.phase={}\n", sp.phase));
        }
        for (side, vocab) in [("src", &self.src_vocab), ("tgt", &self.tgt_vocab)] {
            header.push_str(&format!("{side}_vocab.len={}\n", vocab.len()));
            for (i, unit) in vocab.units().iter().enumerate() {
                header.push_str(&format!("{side}_vocab.{i}={unit}\n"));
            }
        }
        w.write_all(header.as_bytes()).map_err(io)?;

        let tensors = self.tensor_sections();
        w.write_all(format!("tensors.len={}\n", tensors.len()).as_bytes())
            .map_err(io)?;
        for (name, t) in tensors {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            w.write_all(format!("tensor {name} f64 {}\n", dims.join("x")).as_bytes())
                .map_err(io)?;
            for v in t.data() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    fn tensor_sections(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (name, t) in self.params.iter() {
            out.push((format!("param.{name}"), t));
        }
        for (name, t) in &self.adam.m {
            out.push((format!("adam.m.{name}"), t));
        }
        for (name, t) in &self.adam.v {
            out.push((format!("adam.v.{name}"), t));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let bad = |msg: &str| Error::parse(path.display().to_string(), msg);

        let mut line = String::new();
        r.read_line(&mut line).map_err(io)?;
        if line.trim_end() != MAGIC {
            return Err(bad("bad checkpoint magic"));
        }

        // header key=value lines until the tensor section
        let mut kv: HashMap<String, String> = HashMap::new();
        let tensor_count: usize;
        loop {
            line.clear();
            if r.read_line(&mut line).map_err(io)? == 0 {
                return Err(bad("truncated header"));
            }
            let l = line.trim_end_matches('\n');
            let Some((k, v)) = l.split_once('=') else {
                return Err(bad(&format!("bad header line `{l}`")));
            };
            if k == "tensors.len" {
                tensor_count = v
                    .parse()
                    .map_err(|_| bad("bad tensors.len"))?;
                break;
            }
            kv.insert(k.to_string(), v.to_string());
        }

        let spec_kv: HashMap<String, String> = kv
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("spec.")
                    .map(|s| (s.to_string(), v.clone()))
            })
            .collect();
        let spec = ModelSpec::from_kv_pairs(&spec_kv)?;

        let get = |k: &str| -> Result<&String> {
            kv.get(k).ok_or_else(|| bad(&format!("missing `{k}`")))
        };
        let update_count: u64 = get("update_count")?
            .parse()
            .map_err(|_| bad("bad update_count"))?;

        let hist_len: usize = get("history.len")?
            .parse()
            .map_err(|_| bad("bad history.len"))?;
        let mut history = Vec::with_capacity(hist_len);
        for i in 0..hist_len {
            history.push(SavePoint {
                updates: get(&format!("history.{i}.updates"))?
                    .parse()
                    .map_err(|_| bad("bad history updates"))?,
                cross_entropy: get(&format!("history.{i}.cross_entropy"))?
                    .parse()
                    .map_err(|_| bad("bad history cross_entropy"))?,
                metric: get(&format!("history.{i}.metric"))?
                    .parse()
                    .map_err(|_| bad("bad history metric"))?,
                valid_tag: get(&format!("history.{i}.valid_tag"))?.clone(),
                phase: get(&format!("history.{i}.phase"))?
                    .parse()
                    .map_err(|_| bad("bad history phase"))?,
            });
        }

        let read_vocab = |side: &str| -> Result<Vocab> {
            let n: usize = get(&format!("{side}_vocab.len"))?
                .parse()
                .map_err(|_| bad("bad vocab len"))?;
            let mut units = Vec::with_capacity(n);
            for i in 0..n {
                units.push(get(&format!("{side}_vocab.{i}"))?.clone());
            }
            Ok(Vocab::from_unit_list(units))
        };
        let src_vocab = read_vocab("src")?;
        let tgt_vocab = read_vocab("tgt")?;

        let mut sections: IndexMap<String, Tensor> = IndexMap::new();
        for _ in 0..tensor_count {
            line.clear();
            if r.read_line(&mut line).map_err(io)? == 0 {
                return Err(bad("truncated tensor section"));
            }
            let l = line.trim_end_matches('\n');
            let parts: Vec<&str> = l.split(' ').collect();
            if parts.len() != 4 || parts[0] != "tensor" || parts[2] != "f64" {
                return Err(bad(&format!("bad tensor line `{l}`")));
            }
            let name = parts[1].to_string();
            let shape: Vec<usize> = parts[3]
                .split('x')
                .map(|d| d.parse().map_err(|_| bad("bad tensor shape")))
                .collect::<Result<_>>()?;
            let n: usize = shape.iter().product();
            let mut payload = vec![0u8; n * 8 + 1]; // data plus trailing newline
            r.read_exact(&mut payload).map_err(io)?;
            if payload[n * 8] != b'\n' {
                return Err(bad("missing tensor terminator"));
            }
            let data: Vec<f64> = payload[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            sections.insert(name, Tensor::new(shape, data));
        }

        let mut params: IndexMap<String, Rc<Tensor>> = IndexMap::new();
        let mut adam = AdamState::new(std::iter::empty());
        adam.t = get("adam.t")?.parse().map_err(|_| bad("bad adam.t"))?;
        adam.beta1 = get("adam.beta1")?.parse().map_err(|_| bad("bad adam.beta1"))?;
        adam.beta2 = get("adam.beta2")?.parse().map_err(|_| bad("bad adam.beta2"))?;
        adam.eps = get("adam.eps")?.parse().map_err(|_| bad("bad adam.eps"))?;
        for (name, t) in sections {
            if let Some(p) = name.strip_prefix("param.") {
                params.insert(p.to_string(), Rc::new(t));
            } else if let Some(p) = name.strip_prefix("adam.m.") {
                adam.m.insert(p.to_string(), t);
            } else if let Some(p) = name.strip_prefix("adam.v.") {
                adam.v.insert(p.to_string(), t);
            } else {
                return Err(bad(&format!("unknown tensor section `{name}`")));
            }
        }

        let ckpt = Checkpoint {
            spec,
            src_vocab,
            tgt_vocab,
            params: ParamStore::from_tensors(params),
            adam,
            update_count,
            history,
        };
        ckpt.params.validate_layout(&ckpt.spec)?;
        Ok(ckpt)
    }
}

/// Full-precision decimal form that parses back to the identical f64.
fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:.17e}")
    }
}

/// The last `n` checkpoints of a run by update count; selection is by
/// iteration count, not held-out performance.
pub fn checkpoint_ensemble(checkpoints: &[Checkpoint], n: usize) -> Result<Vec<&Checkpoint>> {
    if checkpoints.len() < n {
        return Err(Error::InvalidArg(format!(
            "checkpoint ensemble of {n} requested but only {} checkpoints exist",
            checkpoints.len()
        )));
    }
    let mut by_updates: Vec<&Checkpoint> = checkpoints.iter().collect();
    by_updates.sort_by_key(|c| c.update_count);
    Ok(by_updates[by_updates.len() - n..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, Family};

    fn toy_checkpoint(update_count: u64) -> Checkpoint {
        let spec = ModelSpec {
            family: Family::DeepTransition,
            enc_depth: 2,
            dec_depth: 2,
            embedding_dim: 3,
            hidden_dim: 4,
            src_vocab: 5,
            tgt_vocab: 6,
            tie_output: true,
            layer_norm: true,
            direction: Direction::LeftToRight,
        };
        let params = ParamStore::init(&spec, 7);
        let adam = AdamState::new(params.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())));
        Checkpoint {
            spec,
            src_vocab: Vocab::numbered(5),
            tgt_vocab: Vocab::numbered(6),
            params,
            adam,
            update_count,
            history: vec![SavePoint {
                updates: update_count,
                cross_entropy: 1.25,
                metric: 0.5,
                valid_tag: "default".into(),
                phase: 0,
            }],
        }
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let dir = std::env::temp_dir().join(format!("ckpt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        let ckpt = toy_checkpoint(400);
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.spec, ckpt.spec);
        assert_eq!(back.update_count, 400);
        assert_eq!(back.history, ckpt.history);
        assert!(back.params.bitwise_eq(&ckpt.params));
        assert_eq!(back.adam.t, ckpt.adam.t);
        for (name, t) in &ckpt.adam.m {
            assert_eq!(back.adam.m[name].data(), t.data());
        }
        // saving the loaded checkpoint reproduces the file byte for byte
        let path2 = dir.join("model2.ckpt");
        back.save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ensemble_selects_by_iteration_count() {
        let ckpts: Vec<Checkpoint> = [10_000u64, 30_000, 20_000, 80_000, 50_000, 70_000, 60_000, 40_000]
            .iter()
            .map(|&u| toy_checkpoint(u))
            .collect();
        let picked = checkpoint_ensemble(&ckpts, 4).unwrap();
        let updates: Vec<u64> = picked.iter().map(|c| c.update_count).collect();
        assert_eq!(updates, vec![50_000, 60_000, 70_000, 80_000]);

        let one = checkpoint_ensemble(&ckpts, 1).unwrap();
        assert_eq!(one[0].update_count, 80_000);

        assert!(checkpoint_ensemble(&ckpts[..3], 4).is_err());
    }
}

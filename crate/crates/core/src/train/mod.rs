//! Optimization loop: adam with global-norm clipping, length filtering,
//! epoch shuffling, mixed and fine-tuned regimes, validation save-points,
//! early stopping and checkpoint selection.

mod adam;
mod checkpoint;

pub use adam::{adam_step, clip_global_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{checkpoint_ensemble, Checkpoint, SavePoint};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::datapipe::{ParallelCorpus, Provenance};
use crate::decode::{beam_search, corpus_nll, BeamParams};
use crate::error::{Error, Result};
use crate::eval::corpus_bleu;
use crate::model::{ModelSpec, NmtModel, Vocab};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Synthetic and parallel data mixed from the start.
    Mixed,
    /// Parallel-only until converged, then continue on the full mix.
    FineTuned,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Regime::Mixed),
            "fine_tuned" | "fine-tuned" => Ok(Regime::FineTuned),
            other => Err(Error::InvalidArg(format!("unknown regime `{other}`"))),
        }
    }
}

/// Which number picks the best checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    /// Greedy-decode BLEU on the validation set (the default).
    Bleu,
    /// Negative validation cross-entropy (cheaper).
    CrossEntropy,
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bleu" => Ok(SelectionMetric::Bleu),
            "cross_entropy" | "xent" => Ok(SelectionMetric::CrossEntropy),
            other => Err(Error::InvalidArg(format!("unknown selection metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Sentence pairs with either side longer than this are dropped.
    pub max_len: usize,
    /// Updates between save-points.
    pub save_every: u64,
    /// Non-improving save-points tolerated before stopping.
    pub patience: usize,
    pub regime: Regime,
    pub seed: u64,
    pub selection: SelectionMetric,
    /// Hard cap on total updates; None trains until early stopping.
    pub max_updates: Option<u64>,
    pub valid_tag: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.0001,
            batch_size: 60,
            max_len: 50,
            save_every: 10_000,
            patience: 10,
            regime: Regime::Mixed,
            seed: 1,
            selection: SelectionMetric::Bleu,
            max_updates: None,
            valid_tag: "default".to_string(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.batch_size == 0
            || self.max_len == 0
            || self.save_every == 0
            || self.patience == 0
        {
            return Err(Error::InvalidArg(
                "learning rate, batch size, max length, save interval and patience must be positive"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub src: Vec<String>,
    pub reference: Vec<String>,
}

impl ValidationSet {
    pub fn new(src: Vec<String>, reference: Vec<String>) -> Result<Self> {
        if src.len() != reference.len() {
            return Err(Error::InvalidArg(format!(
                "validation source has {} lines, reference {}",
                src.len(),
                reference.len()
            )));
        }
        if src.is_empty() {
            return Err(Error::EmptyCorpus("validation set".into()));
        }
        Ok(ValidationSet { src, reference })
    }
}

pub struct TrainOutcome {
    /// Checkpoint with the best validation selection metric of this run.
    pub best: Checkpoint,
    /// Training state at the final update.
    pub last: Checkpoint,
    pub history: Vec<SavePoint>,
    /// Every save-point checkpoint of this run, in update order.
    pub checkpoints: Vec<Checkpoint>,
    /// Paths of checkpoints written to the output directory, if any.
    pub written: Vec<PathBuf>,
}

const CLIP_NORM: f64 = 1.0;

/// Early stopping fires at the first save-point where the distance back to
/// the phase's strict cross-entropy minimum reaches the patience.
fn should_stop(phase_xents: &[f64], patience: usize) -> bool {
    let Some((best_idx, _)) = phase_xents
        .iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 < best.1 { cur } else { best })
    else {
        return false;
    };
    phase_xents.len() - 1 - best_idx >= patience
}

fn encode_pairs(
    corpus: &ParallelCorpus,
    src_vocab: &Vocab,
    tgt_vocab: &Vocab,
    max_len: usize,
) -> Vec<(Vec<u32>, Vec<u32>)> {
    corpus
        .pairs
        .iter()
        .filter_map(|p| {
            let s = src_vocab.encode_line(&p.src);
            let t = tgt_vocab.encode_line(&p.tgt);
            if s.is_empty() || s.len() > max_len || t.len() > max_len {
                None
            } else {
                Some((s, t))
            }
        })
        .collect()
}

/// Greedy-decode exact-BLEU of the model on the validation set.
fn validation_bleu(model: &NmtModel, valid: &ValidationSet) -> Result<f64> {
    let models = std::slice::from_ref(model);
    let mut hyps = Vec::with_capacity(valid.src.len());
    for (i, line) in valid.src.iter().enumerate() {
        let ids = model.src_vocab.encode_line(line);
        if ids.is_empty() {
            hyps.push(String::new());
            continue;
        }
        let params = BeamParams {
            beam: 1,
            nbest: 1,
            max_len: 2 * ids.len() + 5,
        };
        let list = beam_search(models, &ids, &params, i)?;
        hyps.push(
            list.best()
                .map(|h| model.tgt_vocab.decode_ids(h.content()))
                .unwrap_or_default(),
        );
    }
    Ok(corpus_bleu(&hyps, &valid.reference)?.bleu)
}

struct Trainer<'a> {
    model: NmtModel,
    adam: AdamState,
    update_count: u64,
    /// Full history, including entries inherited from a resumed checkpoint.
    history: Vec<SavePoint>,
    /// Save-points inherited rather than produced by this run.
    prior_history: usize,
    checkpoints: Vec<Checkpoint>,
    written: Vec<PathBuf>,
    config: &'a TrainConfig,
    valid_pairs: Vec<(Vec<u32>, Vec<u32>)>,
    valid: &'a ValidationSet,
    out_dir: Option<&'a Path>,
}

impl<'a> Trainer<'a> {
    fn snapshot(&self) -> Checkpoint {
        Checkpoint {
            spec: self.model.spec.clone(),
            src_vocab: self.model.src_vocab.clone(),
            tgt_vocab: self.model.tgt_vocab.clone(),
            params: self.model.params.clone(),
            adam: self.adam.clone(),
            update_count: self.update_count,
            history: self.history.clone(),
        }
    }

    fn save_point(&mut self, phase: u32) -> Result<()> {
        let xent = corpus_nll(std::slice::from_ref(&self.model), &self.valid_pairs)?;
        let metric = match self.config.selection {
            SelectionMetric::Bleu => validation_bleu(&self.model, self.valid)?,
            SelectionMetric::CrossEntropy => -xent,
        };
        self.history.push(SavePoint {
            updates: self.update_count,
            cross_entropy: xent,
            metric,
            valid_tag: self.config.valid_tag.clone(),
            phase,
        });
        let ckpt = self.snapshot();
        if let Some(dir) = self.out_dir {
            let path = dir.join(format!("ckpt-{:09}.ckpt", self.update_count));
            ckpt.save(&path)?;
            self.written.push(path);
        }
        self.checkpoints.push(ckpt);
        Ok(())
    }

    /// Index into this run's checkpoints of the best save-point (by metric,
    /// ties to the earliest) among those matching the filter.
    fn best_of_run(&self, phase: Option<u32>) -> Option<usize> {
        self.history[self.prior_history..]
            .iter()
            .enumerate()
            .filter(|(_, sp)| phase.map(|p| sp.phase == p).unwrap_or(true))
            .reduce(|best, cur| if cur.1.metric > best.1.metric { cur } else { best })
            .map(|(i, _)| i)
    }

    /// Run one phase until early stopping or the update cap. Returns true
    /// if the global update cap ended the phase.
    fn run_phase(&mut self, pairs: &[(Vec<u32>, Vec<u32>)], phase: u32) -> Result<bool> {
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus(
                "no training pairs survive the length filter".into(),
            ));
        }
        let cfg = self.config;
        let mut epoch = 0u64;
        loop {
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rng_for(
                cfg.seed,
                &format!("shuffle-p{phase}-e{epoch}"),
            ));
            for chunk in order.chunks(cfg.batch_size) {
                if let Some(cap) = cfg.max_updates {
                    if self.update_count >= cap {
                        if self.history.last().map(|sp| sp.updates) != Some(self.update_count) {
                            self.save_point(phase)?;
                        }
                        return Ok(true);
                    }
                }
                let batch: Vec<(Vec<u32>, Vec<u32>)> =
                    chunk.iter().map(|&i| pairs[i].clone()).collect();
                let (loss, _, mut grads) = self.model.batch_loss_grads(&batch)?;
                if !loss.is_finite() {
                    return Err(Error::Train(format!(
                        "non-finite loss at update {}",
                        self.update_count
                    )));
                }
                clip_global_norm(&mut grads, CLIP_NORM);
                let deltas = adam_step(&grads, &mut self.adam, cfg.learning_rate);
                for (name, delta) in &deltas {
                    let mut t = (**self.model.params.get(name)).clone();
                    for (p, d) in t.data_mut().iter_mut().zip(delta.data()) {
                        *p += d;
                    }
                    self.model.params.set(name, t);
                }
                self.update_count += 1;

                if self.update_count % cfg.save_every == 0 {
                    self.save_point(phase)?;
                    let phase_xents: Vec<f64> = self
                        .history
                        .iter()
                        .filter(|sp| sp.phase == phase)
                        .map(|sp| sp.cross_entropy)
                        .collect();
                    if should_stop(&phase_xents, cfg.patience) {
                        return Ok(false);
                    }
                }
            }
            epoch += 1;
        }
    }

    fn finish(mut self) -> Result<TrainOutcome> {
        let best = match self.best_of_run(None) {
            Some(i) => self.checkpoints[i].clone(),
            // zero updates ran: the current state is both best and last
            None => self.snapshot(),
        };
        if let Some(dir) = self.out_dir {
            let path = dir.join("best.ckpt");
            best.save(&path)?;
            self.written.push(path);
        }
        Ok(TrainOutcome {
            best,
            last: self.snapshot(),
            history: self.history,
            checkpoints: self.checkpoints,
            written: self.written,
        })
    }
}

/// Train a fresh model on the corpus. The network vocabularies are built
/// from the full corpus, so a fine-tuned phase switch never changes the
/// model shape.
pub fn train(
    spec_template: &ModelSpec,
    corpus: &ParallelCorpus,
    valid: &ValidationSet,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("training corpus".into()));
    }
    let src_vocab = Vocab::from_corpus(corpus.pairs.iter().map(|p| p.src.as_str()));
    let tgt_vocab = Vocab::from_corpus(corpus.pairs.iter().map(|p| p.tgt.as_str()));
    let mut spec = spec_template.clone();
    spec.src_vocab = src_vocab.len();
    spec.tgt_vocab = tgt_vocab.len();
    spec.validate()?;

    let model = NmtModel::init(spec, src_vocab, tgt_vocab, config.seed)?;
    let adam = AdamState::new(model.params.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())));
    run_regime(model, adam, 0, Vec::new(), corpus, valid, config, out_dir)
}

/// Continue training from a checkpoint on a (possibly different) corpus,
/// with a possibly swapped validation set. The checkpoint's vocabularies
/// stay authoritative; unseen units map to the unknown symbol.
pub fn resume(
    checkpoint: &Checkpoint,
    spec_template: &ModelSpec,
    corpus: &ParallelCorpus,
    valid: &ValidationSet,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut expect = spec_template.clone();
    expect.src_vocab = checkpoint.spec.src_vocab;
    expect.tgt_vocab = checkpoint.spec.tgt_vocab;
    if expect != checkpoint.spec {
        return Err(Error::SpecMismatch(
            "checkpoint architecture differs from the requested spec".into(),
        ));
    }
    let model = checkpoint.model()?;
    run_regime(
        model,
        checkpoint.adam.clone(),
        checkpoint.update_count,
        checkpoint.history.clone(),
        corpus,
        valid,
        config,
        out_dir,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_regime(
    model: NmtModel,
    adam: AdamState,
    update_count: u64,
    history: Vec<SavePoint>,
    corpus: &ParallelCorpus,
    valid: &ValidationSet,
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let src_vocab = model.src_vocab.clone();
    let tgt_vocab = model.tgt_vocab.clone();
    let valid_pairs: Vec<(Vec<u32>, Vec<u32>)> = valid
        .src
        .iter()
        .zip(&valid.reference)
        .filter_map(|(s, r)| {
            let si = src_vocab.encode_line(s);
            let ti = tgt_vocab.encode_line(r);
            if si.is_empty() {
                None
            } else {
                Some((si, ti))
            }
        })
        .collect();
    if valid_pairs.is_empty() {
        return Err(Error::EmptyCorpus("validation set after encoding".into()));
    }

    let start_phase = history.last().map(|sp| sp.phase).unwrap_or(0);
    let prior_history = history.len();
    let mut trainer = Trainer {
        model,
        adam,
        update_count,
        history,
        prior_history,
        checkpoints: Vec::new(),
        written: Vec::new(),
        config,
        valid_pairs,
        valid,
        out_dir,
    };

    match config.regime {
        Regime::Mixed => {
            let pairs = encode_pairs(corpus, &src_vocab, &tgt_vocab, config.max_len);
            trainer.run_phase(&pairs, start_phase)?;
        }
        Regime::FineTuned => {
            let parallel = corpus.with_tag(Provenance::Parallel);
            if parallel.is_empty() {
                return Err(Error::EmptyCorpus(
                    "fine-tuned regime needs parallel-tagged data for its first phase".into(),
                ));
            }
            let phase1 = encode_pairs(&parallel, &src_vocab, &tgt_vocab, config.max_len);
            let capped = trainer.run_phase(&phase1, start_phase)?;
            if !capped {
                // restart from the best phase-1 parameters and optimizer
                // moments; the update counter stays monotonic across phases
                if let Some(i) = trainer.best_of_run(Some(start_phase)) {
                    let best = &trainer.checkpoints[i];
                    trainer.model = best.model()?;
                    trainer.adam = best.adam.clone();
                }
                let pairs = encode_pairs(corpus, &src_vocab, &tgt_vocab, config.max_len);
                trainer.run_phase(&pairs, start_phase + 1)?;
            }
        }
    }
    trainer.finish()
}

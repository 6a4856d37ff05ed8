//! Minibatch training with Adam and dev-perplexity model selection.

mod checkpoint;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointMeta, ManifestEntry,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use crate::numcore::rng::{derive_seed, seeded};
use crate::numcore::{adam_step, AdamConfig};
use crate::seq2seq::{ModelError, Phase, Seq2Seq};
use crate::textdata::{make_batches, source_ids, target_ids, CharVocab, DataError, ParallelCorpus};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { epoch: usize, batch: usize, detail: String },
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Rescale gradients whose global norm exceeds this. Off by default.
    pub clip_norm: Option<f64>,
    /// Stop once dev perplexity is at or below this value.
    pub target_perplexity: Option<f64>,
    /// Where per-epoch checkpoints and `best.ckpt` are written.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            batch_size: 128,
            max_epochs: 40,
            dropout: 0.15,
            seed: 0,
            clip_norm: None,
            target_perplexity: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0) {
            return Err(TrainError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config(
                "max_epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(TrainError::Config(
                "Adam decay rates must lie in [0, 1) and eps be positive".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(TrainError::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sequence training loss, with dropout active.
    pub train_loss: f64,
    pub dev_perplexity: f64,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev perplexity.
    pub best: Seq2Seq,
    pub best_epoch: usize,
    pub best_perplexity: f64,
    /// Serialized checkpoint of `best`.
    pub best_checkpoint: Vec<u8>,
    pub history: Vec<EpochStats>,
    /// Parameters after the last epoch.
    pub last: Seq2Seq,
}

/// Character perplexity `exp(Σ loss / Σ predicted symbols)` with teacher
/// forcing and dropout off. Each target counts its characters plus ⟨eos⟩.
pub fn perplexity(model: &Seq2Seq, corpus: &ParallelCorpus) -> Result<f64, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::Data(DataError::Argument(
            "perplexity of an empty corpus".into(),
        )));
    }
    let (loss, count) = corpus_loss(model, corpus)?;
    Ok((loss / count as f64).exp())
}

/// Total teacher-forced loss and number of predicted symbols.
pub fn corpus_loss(model: &Seq2Seq, corpus: &ParallelCorpus) -> Result<(f64, usize), TrainError> {
    let mut loss = 0.0;
    let mut count = 0;
    for (s, t) in corpus.iter() {
        let score = model.score_pair(&source_ids(&CharVocab, s), &target_ids(&CharVocab, t))?;
        loss += score.loss;
        count += score.steps;
    }
    Ok((loss, count))
}

/// Fraction of target symbols the model predicts by argmax under teacher
/// forcing.
pub fn char_accuracy(model: &Seq2Seq, corpus: &ParallelCorpus) -> Result<f64, TrainError> {
    let mut correct = 0;
    let mut count = 0;
    for (s, t) in corpus.iter() {
        let score = model.score_pair(&source_ids(&CharVocab, s), &target_ids(&CharVocab, t))?;
        correct += score.correct;
        count += score.steps;
    }
    Ok(correct as f64 / count.max(1) as f64)
}

/// Trains `model` in place for up to `max_epochs`. Each batch's gradient
/// is the per-sequence mean. After every epoch the dev perplexity is
/// measured and, when a checkpoint directory is set, `epoch-NNN.ckpt` is
/// written; the best epoch is copied to `best.ckpt`. Identical inputs and
/// seeds give bit-identical results.
pub fn train(
    mut model: Seq2Seq,
    train_corpus: &ParallelCorpus,
    dev_corpus: &ParallelCorpus,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_corpus.is_empty() || dev_corpus.is_empty() {
        return Err(TrainError::Data(DataError::Argument(
            "training and dev corpora must be nonempty".into(),
        )));
    }
    model.set_dropout(cfg.dropout)?;
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    }
    let adam = cfg.adam();
    let mut rng = seeded(derive_seed(cfg.seed, "trainer"));
    let mut history = Vec::new();
    let mut best: Option<(Seq2Seq, usize, f64, Vec<u8>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let batches = make_batches(train_corpus, &CharVocab, cfg.batch_size, &mut rng)?;
        let mut epoch_loss = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let mut grads = model.params().zero_grads();
            let mut batch_loss = 0.0;
            for i in 0..batch.len() {
                let (src, tgt) = batch.row(i);
                let loss = model
                    .accumulate_gradients(src, tgt, &mut Phase::Train(&mut rng), &mut grads)
                    .map_err(|e| TrainError::NonFinite {
                        epoch,
                        batch: bi,
                        detail: e.to_string(),
                    })?;
                batch_loss += loss;
            }
            grads.scale(1.0 / batch.len() as f64);
            if !grads.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: bi,
                    detail: "gradient".into(),
                });
            }
            if let Some(c) = cfg.clip_norm {
                grads.clip_global_norm(c);
            }
            adam_step(model.params_mut(), &grads, &adam).map_err(ModelError::from)?;
            epoch_loss += batch_loss;
        }
        let dev_perplexity = perplexity(&model, dev_corpus)?;
        if !dev_perplexity.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: batches.len(),
                detail: "dev perplexity".into(),
            });
        }
        let stats = EpochStats {
            epoch,
            train_loss: epoch_loss / train_corpus.len() as f64,
            dev_perplexity,
            steps: model.params().step(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.4}, dev perplexity {dev_perplexity:.4}",
            stats.train_loss
        );
        history.push(stats);

        let bytes = checkpoint_bytes(&model, epoch, dev_perplexity);
        if let Some(dir) = &cfg.checkpoint_dir {
            let path = dir.join(format!("epoch-{epoch:03}.ckpt"));
            fs::write(&path, &bytes).map_err(|e| TrainError::io(&path, e))?;
        }
        if best.as_ref().is_none_or(|b| dev_perplexity < b.2) {
            best = Some((model.clone(), epoch, dev_perplexity, bytes));
        }
        if cfg.target_perplexity.is_some_and(|t| dev_perplexity <= t) {
            break;
        }
    }

    let (best_model, best_epoch, best_perplexity, best_checkpoint) = best.expect("at least one epoch ran");
    if let Some(dir) = &cfg.checkpoint_dir {
        let path = dir.join("best.ckpt");
        fs::write(&path, &best_checkpoint).map_err(|e| TrainError::io(&path, e))?;
    }
    Ok(TrainOutcome {
        best: best_model,
        best_epoch,
        best_perplexity,
        best_checkpoint,
        history,
        last: model,
    })
}

//! Epoch loop: shuffled batches, validation-driven learning-rate halving,
//! checkpoints and a per-epoch metrics log.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lmfca_core::loss::{mean_terms, LossTerms};
use lmfca_core::net::{init_params, ModelConfig};
use lmfca_core::optim::TrainState;
use lmfca_core::pipeline::{clip_gradients, clip_loss, prepare_example, PreparedSegment};
use lmfca_core::train::{apply_gradients, epoch_order};
use lmfca_core::{Error as CoreError, ParameterStore};
use rayon::prelude::*;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::TrainConfig;
use crate::error::{Result, ToolkitError};
use crate::manifest::Manifest;

pub const METRICS_FILE: &str = "metrics.tsv";
pub const METRICS_HEADER: &str = "epoch\ttrain_loss\tval_loss\tlr\twall_s";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

pub fn epoch_checkpoint(epoch: u32) -> String {
    format!("epoch_{epoch:04}.ckpt")
}

/// Loads every record and cuts it into prepared clips, in manifest order.
pub fn load_segments(manifest: &Manifest, mics: usize) -> Result<Vec<PreparedSegment<f32>>> {
    let per_record = manifest
        .records
        .par_iter()
        .map(|r| {
            let ex = manifest.load_example(r)?;
            Ok(prepare_example(&ex.mixture, &ex.direct_ref, mics)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub wall_s: f64,
}

impl EpochMetrics {
    pub fn to_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.3}",
            self.epoch, self.train_loss, self.val_loss, self.lr, self.wall_s
        )
    }
}

fn diverged(e: CoreError) -> ToolkitError {
    match e {
        CoreError::NonFinite(op) => ToolkitError::Format(format!("training diverged: non-finite value in {op}")),
        e => e.into(),
    }
}

pub struct Trainer {
    pub model: ModelConfig,
    pub cfg: TrainConfig,
    pub params: ParameterStore<f32>,
    pub state: TrainState<f32>,
    train: Vec<PreparedSegment<f32>>,
    val: Vec<PreparedSegment<f32>>,
}

impl Trainer {
    /// Fresh parameters from `cfg.seed`.
    pub fn new(
        model: ModelConfig,
        cfg: TrainConfig,
        train: Vec<PreparedSegment<f32>>,
        val: Vec<PreparedSegment<f32>>,
    ) -> Result<Self> {
        let params = init_params::<f32>(&model, cfg.seed)?;
        let state = TrainState::new(&params, cfg.lr);
        Self::with_state(model, cfg, params, state, train, val)
    }

    /// Continues from a checkpoint that carries optimizer state.
    pub fn resume(
        path: &Path,
        cfg: TrainConfig,
        train: Vec<PreparedSegment<f32>>,
        val: Vec<PreparedSegment<f32>>,
    ) -> Result<Self> {
        let m = load_checkpoint(path)?;
        let state = m
            .state
            .ok_or_else(|| ToolkitError::Format(format!("{}: no optimizer state to resume from", path.display())))?;
        Self::with_state(m.cfg, cfg, m.params, state, train, val)
    }

    fn with_state(
        model: ModelConfig,
        cfg: TrainConfig,
        params: ParameterStore<f32>,
        state: TrainState<f32>,
        train: Vec<PreparedSegment<f32>>,
        val: Vec<PreparedSegment<f32>>,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(ToolkitError::Config("training set is empty".into()));
        }
        if val.is_empty() {
            return Err(ToolkitError::Config("validation set is empty".into()));
        }
        Ok(Self {
            model,
            cfg,
            params,
            state,
            train,
            val,
        })
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    /// One optimizer step on the given training clips. Per-clip gradients
    /// may be computed in parallel; they are summed in batch order.
    pub fn step(&mut self, batch: &[usize]) -> Result<LossTerms> {
        let (params, model, w) = (&self.params, &self.model, &self.cfg.weights);
        let results = batch
            .par_iter()
            .map(|&i| clip_gradients(params, model, &self.train[i], w))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(diverged)?;
        let (terms, grads): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        apply_gradients(&mut self.params, &mut self.state, &grads, self.cfg.grad_clip).map_err(diverged)?;
        if self.params.iter().any(|(_, t)| !t.is_finite()) {
            return Err(diverged(CoreError::NonFinite("adam_step")));
        }
        Ok(mean_terms(&terms))
    }

    /// Mean composite loss over the validation clips.
    pub fn validate(&self) -> Result<f64> {
        let losses = self
            .val
            .par_iter()
            .map(|s| clip_loss(&self.params, &self.model, s, &self.cfg.weights).map(|t| t.total))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        if !mean.is_finite() {
            return Err(diverged(CoreError::NonFinite("validation")));
        }
        Ok(mean)
    }

    /// Runs the next epoch (at most `max_steps` batches when set), then
    /// validates and applies the plateau rule. Returns the metrics and
    /// whether validation improved.
    pub fn run_epoch(&mut self, max_steps: Option<usize>) -> Result<(EpochMetrics, bool)> {
        let t0 = Instant::now();
        let epoch = self.state.epoch;
        let order = epoch_order(self.train.len(), self.cfg.seed, epoch);
        let mut losses = Vec::new();
        for batch in order.chunks(self.cfg.batch).take(max_steps.unwrap_or(usize::MAX)) {
            let t = self.step(batch)?;
            log::debug!("epoch {epoch} step {} loss {:.5}", self.state.step, t.total);
            losses.push(t.total);
        }
        let train_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        let val_loss = self.validate()?;
        let before = self.state.best_val;
        if self.state.observe_validation(val_loss) {
            log::info!("validation stalled; learning rate now {}", self.state.lr);
        }
        let improved = self.state.best_val < before;
        self.state.epoch += 1;
        let m = EpochMetrics {
            epoch: self.state.epoch,
            train_loss,
            val_loss,
            lr: self.state.lr,
            wall_s: t0.elapsed().as_secs_f64(),
        };
        Ok((m, improved))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.model, &self.params, Some(&self.state))
    }

    /// Trains until `cfg.epochs` epochs are complete, writing
    /// `epoch_NNNN.ckpt`, `best.ckpt` and `metrics.tsv` into `out`.
    pub fn fit(&mut self, out: &Path, max_steps: Option<usize>) -> Result<Vec<EpochMetrics>> {
        std::fs::create_dir_all(out)?;
        let metrics_path = out.join(METRICS_FILE);
        if !metrics_path.exists() {
            std::fs::write(&metrics_path, format!("{METRICS_HEADER}\n"))?;
        }
        let mut log_file = OpenOptions::new().append(true).open(&metrics_path)?;
        let mut all = Vec::new();
        while self.state.epoch < self.cfg.epochs {
            let (m, improved) = self.run_epoch(max_steps)?;
            writeln!(log_file, "{}", m.to_row())?;
            log::info!(
                "epoch {} train {:.5} val {:.5} lr {} ({:.1} s)",
                m.epoch,
                m.train_loss,
                m.val_loss,
                m.lr,
                m.wall_s
            );
            self.save(&out.join(epoch_checkpoint(m.epoch)))?;
            if improved {
                self.save(&out.join(BEST_CHECKPOINT))?;
            }
            all.push(m);
        }
        Ok(all)
    }
}

/// Splits `manifest`, prepares both parts and builds a trainer, resuming
/// from `resume` when given.
pub fn trainer_from_manifest(
    manifest: &Manifest,
    model: ModelConfig,
    cfg: TrainConfig,
    resume: Option<&PathBuf>,
) -> Result<Trainer> {
    if manifest.records.is_empty() {
        return Err(ToolkitError::Config("manifest is empty".into()));
    }
    let mics = match resume {
        Some(p) => load_checkpoint(p)?.cfg.mics,
        None => model.mics,
    };
    let (tr, va) = manifest.split_tail(cfg.val_fraction);
    let train = load_segments(&tr, mics)?;
    let val = load_segments(&va, mics)?;
    log::info!(
        "{} training clips from {} examples, {} validation clips from {} examples",
        train.len(),
        tr.records.len(),
        val.len(),
        va.records.len()
    );
    match resume {
        Some(p) => Trainer::resume(p, cfg, train, val),
        None => Trainer::new(model, cfg, train, val),
    }
}

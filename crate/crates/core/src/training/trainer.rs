use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, OptimizerState};
use super::data::{epoch_order, Example};
use super::loss::{batch_loss, masked_loss};
use super::schedule::{ScheduleEvent, ScheduleState};
use crate::dsp::{LpsMatrix, Normalizer};
use crate::error::{Error, Result};
use crate::network::{lps_to_tensor, save_checkpoint, tensor_to_lps, Checkpoint, Model};
use crate::tensor::{NormMode, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_halving_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub segment_samples: usize,
    pub batch_size: usize,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Optional cap on optimizer steps, counted across epochs.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 1e-3,
            lr_halving_patience: 3,
            early_stop_patience: 10,
            max_epochs: 100,
            segment_samples: 32_000,
            batch_size: 8,
            adam_betas: (0.9, 0.999),
            adam_epsilon: 1e-8,
            seed: 0,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.lr_halving_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if self.segment_samples == 0 || !self.segment_samples.is_multiple_of(256) {
            return bad("segment_samples must be a positive multiple of the hop (256)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            betas: self.adam_betas,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when no validation set was supplied; the schedule then runs on
    /// the training loss.
    pub val_loss: Option<f64>,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub event: ScheduleEvent,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,lr,event\n");
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", r.epoch, r.train_loss, val, r.lr, r.event);
    }
    s
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Progress {
    steps: usize,
    optimizer_step: u64,
    schedule: ScheduleState,
    history: Vec<EpochRecord>,
    stopped: bool,
}

/// Owns the model and every piece of state needed to continue training.
pub struct Trainer {
    pub model: Model<f32>,
    pub optimizer: OptimizerState,
    pub schedule: ScheduleState,
    pub history: Vec<EpochRecord>,
    pub steps: usize,
    cfg: TrainConfig,
    norm: Normalizer,
    stopped: bool,
}

impl Trainer {
    pub fn new(model: Model<f32>, norm: Normalizer, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if norm.bins() != model.config().freq_bins {
            return Err(Error::Config(format!(
                "normalizer has {} bins, model expects {}",
                norm.bins(),
                model.config().freq_bins
            )));
        }
        Ok(Trainer {
            optimizer: OptimizerState::new(model.params().iter().map(|p| p.len())),
            schedule: ScheduleState::new(cfg.initial_lr, cfg.lr_halving_patience, cfg.early_stop_patience),
            history: Vec::new(),
            steps: 0,
            model,
            cfg,
            norm,
            stopped: false,
        })
    }

    /// Restores a trainer from [`Trainer::checkpoint`] output.
    pub fn resume(ckpt: Checkpoint, norm: Normalizer, cfg: TrainConfig) -> Result<Self> {
        let progress: Progress = serde_json::from_value(
            ckpt.extra
                .get("training")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("no training state to resume from".into()))?,
        )?;
        let mut t = Trainer::new(ckpt.model.clone(), norm, cfg)?;
        for (i, (m, v)) in t.optimizer.m.iter_mut().zip(&mut t.optimizer.v).enumerate() {
            for (name, dst) in [(format!("adam.m.{i}"), m), (format!("adam.v.{i}"), v)] {
                let src = ckpt
                    .aux(&name)
                    .filter(|s| s.len() == dst.len())
                    .ok_or_else(|| Error::Checkpoint(format!("missing or misshapen {name}")))?;
                dst.copy_from_slice(src);
            }
        }
        t.optimizer.step = progress.optimizer_step;
        t.schedule = progress.schedule;
        t.history = progress.history;
        t.steps = progress.steps;
        t.stopped = progress.stopped;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(self.model.clone());
        let progress = Progress {
            steps: self.steps,
            optimizer_step: self.optimizer.step,
            schedule: self.schedule.clone(),
            history: self.history.clone(),
            stopped: self.stopped,
        };
        ck.extra = serde_json::json!({ "training": serde_json::to_value(progress)? });
        ck.set_normalizer(&self.norm);
        for (i, (m, v)) in self.optimizer.m.iter().zip(&self.optimizer.v).enumerate() {
            ck.aux.push((format!("adam.m.{i}"), m.clone()));
            ck.aux.push((format!("adam.v.{i}"), v.clone()));
        }
        Ok(ck)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.history.len()
    }

    /// True once early stopping, `max_epochs` or `max_steps` has been hit.
    pub fn finished(&self) -> bool {
        self.stopped
            || self.history.len() >= self.cfg.max_epochs
            || self.cfg.max_steps.is_some_and(|m| self.steps >= m)
    }

    fn denormalize(&self, x: &mut Tensor<f32>) {
        let s = x.shape();
        for b in 0..s.batch {
            let plane = x.plane_mut(b, 0);
            for (f, row) in plane.chunks_mut(s.time).enumerate() {
                let (u, v) = (self.norm.mean[f], self.norm.std[f]);
                for x in row {
                    *x = *x * v + u;
                }
            }
        }
    }

    /// One optimizer step on a batch of equally long examples. Returns the
    /// batch loss before the update.
    pub fn step(&mut self, batch: &[&Example]) -> Result<f64> {
        let inputs: Vec<&LpsMatrix> = batch.iter().map(|e| &e.input).collect();
        let targets: Vec<&LpsMatrix> = batch.iter().map(|e| &e.target).collect();
        let valid: Vec<usize> = batch.iter().map(|e| e.valid_frames).collect();
        let x = lps_to_tensor(&inputs)?;
        let target = lps_to_tensor(&targets)?;

        self.model.set_mode(NormMode::Train);
        let tape = self.model.forward_train(&x)?;
        let mut estimate = tape.output().clone();
        self.denormalize(&mut estimate);
        let (loss, mut grad) = batch_loss(&target, &estimate, &valid)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                op: "training loss".into(),
            });
        }
        // Through the denormalization: dŜ/dout = V per bin.
        let s = grad.shape();
        for b in 0..s.batch {
            for (f, row) in grad.plane_mut(b, 0).chunks_mut(s.time).enumerate() {
                let v = self.norm.std[f];
                row.iter_mut().for_each(|g| *g *= v);
            }
        }
        let grads = self.model.backward(&tape, &grad)?;
        let lr = self.schedule.current_lr;
        adam_step(&mut self.model.params_mut(), &grads.groups, &mut self.optimizer, lr, &self.cfg.adam())?;
        self.steps += 1;
        Ok(loss)
    }

    /// Mean loss over whole utterances with frozen statistics.
    pub fn evaluate(&self, data: &[Example]) -> Result<f64> {
        evaluate(&self.model, &self.norm, data)
    }

    /// Trains one epoch and applies the schedule.
    pub fn run_epoch(&mut self, train: &[Example], val: &[Example]) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let epoch = self.history.len() + 1;
        let lr = self.schedule.current_lr;
        let order = epoch_order(train.len(), self.cfg.seed, epoch);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            if self.cfg.max_steps.is_some_and(|m| self.steps >= m) {
                break;
            }
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            total += self.step(&batch)?;
            batches += 1;
        }
        let train_loss = total / batches.max(1) as f64;
        let val_loss = if val.is_empty() { None } else { Some(self.evaluate(val)?) };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::NonFinite {
                op: "validation loss".into(),
            });
        }
        let event = self.schedule.update(monitored);
        if event == ScheduleEvent::Stop {
            self.stopped = true;
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            event,
        };
        log::info!(
            "epoch {epoch}: train {train_loss:.5} val {} lr {lr} {event}",
            val_loss.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into())
        );
        self.history.push(record.clone());
        Ok(record)
    }

    /// Runs epochs until finished. With `out_dir`, writes `latest.ckpt`,
    /// `history.csv` and, on every new best, `best.ckpt` after each epoch;
    /// an aborted epoch leaves the previous files intact. Both checkpoints
    /// carry the normalizer; only `latest.ckpt` carries optimizer state.
    pub fn fit(&mut self, train: &[Example], val: &[Example], out_dir: Option<&Path>) -> Result<()> {
        while !self.finished() {
            let best_before = self.schedule.best_val_loss;
            self.run_epoch(train, val)?;
            if let Some(dir) = out_dir {
                let ck = self.checkpoint()?;
                if self.schedule.best_val_loss < best_before {
                    let mut best = ck.clone();
                    best.aux.retain(|(n, _)| !n.starts_with("adam."));
                    best.model.set_mode(NormMode::Inference);
                    save_checkpoint(&dir.join("best.ckpt"), &best)?;
                }
                save_checkpoint(&dir.join("latest.ckpt"), &ck)?;
                write_history_csv(&dir.join("history.csv"), &self.history)?;
            }
        }
        Ok(())
    }
}

/// Mean over utterances of the loss between the clean LPS and the
/// denormalized network output.
pub fn evaluate(model: &Model<f32>, norm: &Normalizer, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    for e in data {
        let y = model.forward(&lps_to_tensor(&[&e.input])?)?;
        let est = norm.denormalize(&tensor_to_lps(&y)?.remove(0))?;
        total += masked_loss(&e.target, &est, e.valid_frames)?;
    }
    Ok(total / data.len() as f64)
}

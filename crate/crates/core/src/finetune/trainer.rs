use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::losses::{loss_age, loss_binary, loss_ce, loss_survival_total};
use super::{EmbeddingTable, FeatureScaler, HeadConfig, Task, TaskHead};
use crate::autograd::Graph;
use crate::data::{LabelSet, RecordSource, Split};
use crate::optim::{Adam, AdamConfig};
use crate::train::{LossPoint, TrainStatus};
use crate::rng::{self, tag};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub head: HeadConfig,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Validation records used for early stopping.
    pub val_records: usize,
    pub seed: u64,
}

impl FinetuneConfig {
    pub fn desk(head: HeadConfig) -> Self {
        Self {
            head,
            adam: AdamConfig::default(),
            batch_size: 8,
            max_epochs: 20,
            patience: 3,
            val_records: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size", "batch size and epochs must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::config("lr", "must be positive"));
        }
        Ok(())
    }
}

/// Test-split output of one record (see [`TaskHead::predict`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RecordPrediction {
    pub record: usize,
    pub output: Tensor,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub head: TaskHead,
    pub curve: Vec<LossPoint>,
    pub status: TrainStatus,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (0 means initialization).
    pub kept_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub predictions: Vec<RecordPrediction>,
}

/// Task loss of `head` on a batch, with gradients for every head parameter.
pub fn task_loss(head: &TaskHead, inputs: &[&Tensor], labels: &[&LabelSet], trainable: bool) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let p = g.bind(head.params(), trainable);
    let out = head.forward(&mut g, &p, inputs)?;
    let v = g.value(out);
    let (loss, grad) = match head.config().task {
        Task::Staging => {
            let mut y = Vec::with_capacity(v.rows());
            for (x, l) in inputs.iter().zip(labels) {
                let t = head.used_len(x.rows());
                if l.hypnogram.len() < t {
                    return Err(Error::shape("hypnogram", t, l.hypnogram.len()));
                }
                y.extend(l.hypnogram[..t].iter().map(|s| s.index()));
            }
            loss_ce(v, &y, None)?
        }
        Task::Apnea => {
            let y: Vec<bool> = labels.iter().map(|l| l.apnea()).collect();
            let (l, gr) = loss_binary(v.data(), &y)?;
            (l, Tensor::from_vec(gr.len(), 1, gr))
        }
        Task::Age => {
            let y: Vec<f64> = labels.iter().map(|l| l.age_years).collect();
            let (l, gr) = loss_age(v.data(), &y)?;
            (l, Tensor::from_vec(gr.len(), 1, gr))
        }
        Task::Survival => {
            let y: Vec<_> = labels.iter().map(|l| l.survival.as_slice()).collect();
            let s = loss_survival_total(v, &y)?;
            (s.loss, s.grad)
        }
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite { term: "task loss" });
    }
    let l = g.fused_scalar(out, loss, grad);
    let grads = g.backward(l);
    Ok((loss, grads.collect(&g, &p)))
}

/// Trains a head on precomputed embeddings of `train` records with early
/// stopping on `val`, then predicts the `test` records.
pub fn finetune<S: RecordSource + ?Sized>(
    source: &S,
    table: &EmbeddingTable,
    train: &[usize],
    val: &[usize],
    test: &[usize],
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    if table.dim != config.head.d_in {
        return Err(Error::shape("embedding width", config.head.d_in, table.dim));
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("no training records".into()));
    }
    let scaler = FeatureScaler::fit(table.dim, train.iter().map(|&r| table.get(r)).collect::<Result<Vec<_>>>()?);
    let mut head = TaskHead::new(HeadConfig { seed: config.seed, ..config.head.clone() }, scaler)?;
    let mut opt = Adam::new(config.adam, head.params());
    let val: Vec<usize> = val.iter().copied().take(config.val_records).collect();
    let batch_of = |ids: &[usize]| -> Result<(Vec<&Tensor>, Vec<&LabelSet>)> {
        let x = ids.iter().map(|&r| table.get(r)).collect::<Result<Vec<_>>>()?;
        let y = ids.iter().map(|&r| &source.meta(r).labels).collect();
        Ok((x, y))
    };
    let evaluate = |head: &TaskHead| -> Result<f64> {
        let (mut total, mut n) = (0.0, 0usize);
        for ids in val.chunks(config.batch_size) {
            let (x, y) = batch_of(ids)?;
            total += task_loss(head, &x, &y, false)?.0 * ids.len() as f64;
            n += ids.len();
        }
        Ok(total / n as f64)
    };

    let mut order = train.to_vec();
    let mut curve = Vec::new();
    let mut best: Option<(f64, TaskHead, usize)> = None;
    let mut since_best = 0;
    let mut status = TrainStatus::Completed;
    let mut steps = 0;
    let mut epochs_run = 0;
    'epochs: for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng::stream(config.seed, &[tag::SHUFFLE, epoch as u64]));
        for ids in order.chunks(config.batch_size) {
            let (x, y) = batch_of(ids)?;
            let (loss, grads) = match task_loss(&head, &x, &y, true) {
                Ok(v) => v,
                Err(Error::NonFinite { .. }) => {
                    status = TrainStatus::Diverged { step: steps + 1 };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if !grads.iter().all(Tensor::all_finite) {
                status = TrainStatus::Diverged { step: steps + 1 };
                break 'epochs;
            }
            opt.step(head.params_mut(), &grads);
            steps += 1;
            curve.push(LossPoint { step: steps, epoch, loss, split: Split::Train });
        }
        epochs_run = epoch;
        if val.is_empty() {
            continue;
        }
        let v = evaluate(&head)?;
        curve.push(LossPoint { step: steps, epoch, loss: v, split: Split::Validation });
        if !v.is_finite() {
            status = TrainStatus::Diverged { step: steps };
            break;
        }
        if best.as_ref().map_or(true, |b| v < b.0) {
            best = Some((v, head.clone(), epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                status = TrainStatus::EarlyStopped { epoch };
                break;
            }
        }
    }
    let best_val_loss = best.as_ref().map(|b| b.0);
    let (head, kept_epoch) = match best {
        Some((_, h, e)) => (h, e),
        None => (head, epochs_run),
    };
    let mut predictions = Vec::with_capacity(test.len());
    for ids in test.chunks(config.batch_size) {
        let (x, _) = batch_of(ids)?;
        for (&record, output) in ids.iter().zip(head.predict(&x)?) {
            predictions.push(RecordPrediction { record, output });
        }
    }
    Ok(FinetuneOutcome {
        head,
        curve,
        status,
        epochs_run,
        kept_epoch,
        best_val_loss,
        predictions,
    })
}

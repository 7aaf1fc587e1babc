use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{PretrainModel, PretrainObjective, DEFAULT_TAU, MASK_RATIO};
use crate::backbone::{Backbone, BackboneConfig};
use crate::data::{RecordSource, Split};
use crate::train::{LossPoint, TrainStatus};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{self, tag};
use crate::{Error, Result, PATCH_LEN};

/// When training ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once validation loss has not improved for `patience` epochs and
    /// keep the best parameters.
    EarlyStopping { max_epochs: usize, patience: usize },
    /// Run exactly `epochs` epochs and keep the final parameters.
    FixedEpochs { epochs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub objective: PretrainObjective,
    pub backbone: BackboneConfig,
    pub mask_ratio: f64,
    pub tau: f64,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub stop: StopRule,
    /// Validation records used for early stopping.
    pub val_records: usize,
    /// Caps segments taken from each record; `None` uses all of them.
    pub max_segments_per_record: Option<usize>,
    /// Caps optimizer steps per epoch; `None` runs full epochs.
    pub max_batches_per_epoch: Option<usize>,
    pub seed: u64,
}

impl PretrainConfig {
    pub fn desk(objective: PretrainObjective) -> Self {
        Self {
            objective,
            backbone: BackboneConfig::desk(),
            mask_ratio: MASK_RATIO,
            tau: DEFAULT_TAU,
            adam: AdamConfig::default(),
            batch_size: 16,
            stop: StopRule::EarlyStopping {
                max_epochs: 20,
                patience: 3,
            },
            val_records: 10,
            max_segments_per_record: None,
            max_batches_per_epoch: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        if self.batch_size == 0 || (self.objective.is_contrastive() && self.batch_size < 2) {
            return Err(Error::config("batch_size", "contrastive objectives need at least 2"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::config("mask_ratio", "must lie in (0, 1)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("tau", "must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::config("lr", "must be positive"));
        }
        match self.stop {
            StopRule::EarlyStopping { max_epochs, .. } | StopRule::FixedEpochs { epochs: max_epochs } if max_epochs == 0 => {
                Err(Error::config("epochs", "must be positive"))
            }
            StopRule::EarlyStopping { .. } if self.val_records == 0 => {
                Err(Error::config("val_records", "early stopping needs validation records"))
            }
            _ => Ok(()),
        }
    }
}

/// One segment of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub record: usize,
    pub segment: usize,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub model: PretrainModel,
    pub curve: Vec<LossPoint>,
    pub status: TrainStatus,
    pub epochs_run: usize,
    pub steps: usize,
    /// Epoch whose parameters were kept (1-based; 0 means initialization).
    pub kept_epoch: usize,
    pub best_val_loss: Option<f64>,
}

fn segments_of<S: RecordSource + ?Sized>(source: &S, records: &[usize], seg_len: usize, cap: Option<usize>) -> Vec<SegmentRef> {
    let mut out = Vec::new();
    for &record in records {
        let n = source.meta(record).n_samples / seg_len;
        for segment in 0..cap.map_or(n, |c| c.min(n)) {
            out.push(SegmentRef { record, segment });
        }
    }
    out
}

/// Splits into batches; with `min_batch` 2 a trailing singleton joins the
/// previous batch.
fn batches(refs: &[SegmentRef], size: usize, min_batch: usize) -> Vec<&[SegmentRef]> {
    let mut out: Vec<&[SegmentRef]> = refs.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < min_batch) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().unwrap() = &refs[start..];
    }
    out.retain(|b| b.len() >= min_batch);
    out
}

struct Loader<'a, S: ?Sized> {
    source: &'a S,
    seg_len: usize,
    label: u64,
    seed: u64,
}

impl<S: RecordSource + ?Sized> Loader<'_, S> {
    fn load(&self, batch: &[SegmentRef], epoch: u64) -> Result<(Vec<Vec<f32>>, Vec<u64>)> {
        let mut segs = Vec::with_capacity(batch.len());
        let mut seeds = Vec::with_capacity(batch.len());
        for r in batch {
            segs.push(self.source.read_window(r.record, r.segment * self.seg_len, self.seg_len)?);
            seeds.push(rng::derive_seed(
                self.seed,
                &[self.label, epoch, r.record as u64, r.segment as u64],
            ));
        }
        Ok((segs, seeds))
    }
}

const VALIDATION_EPOCH: u64 = u64::MAX;

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite { .. })
}

/// Pretrains a fresh backbone on the segments of `train` records.
/// `observer` sees every loss point as it is recorded.
pub fn pretrain<S: RecordSource + ?Sized>(
    source: &S,
    train: &[usize],
    val: &[usize],
    config: &PretrainConfig,
    observer: &mut dyn FnMut(&LossPoint),
) -> Result<PretrainOutcome> {
    config.validate()?;
    let bcfg = config.backbone.clone().with_seed(config.seed);
    bcfg.check_layout(source.layout())?;
    let backbone = Backbone::new(bcfg.clone(), source.layout())?;
    let mut model = PretrainModel::new(config.objective, backbone, config.mask_ratio, config.tau);
    let seg_len = bcfg.segment_patches * PATCH_LEN;
    let min_batch = if config.objective.is_contrastive() { 2 } else { 1 };

    let mut train_refs = segments_of(source, train, seg_len, config.max_segments_per_record);
    if train_refs.len() < min_batch {
        return Err(Error::InvalidInput("not enough training segments".into()));
    }
    let val_ids: Vec<usize> = val.iter().copied().take(config.val_records).collect();
    let val_refs = segments_of(source, &val_ids, seg_len, config.max_segments_per_record);
    let early = matches!(config.stop, StopRule::EarlyStopping { .. });
    if early && val_refs.len() < min_batch {
        return Err(Error::InvalidInput("not enough validation segments for early stopping".into()));
    }

    let label = if config.objective.is_denoising() { tag::CORRUPT } else { tag::MASK };
    let loader = Loader { source, seg_len, label, seed: config.seed };
    let mut opt_b = Adam::new(config.adam, model.backbone.params());
    let mut opt_d = model.decoder.as_ref().map(|d| Adam::new(config.adam, d.params()));

    let (max_epochs, patience) = match config.stop {
        StopRule::EarlyStopping { max_epochs, patience } => (max_epochs, patience),
        StopRule::FixedEpochs { epochs } => (epochs, usize::MAX),
    };
    let mut curve = Vec::new();
    let mut best: Option<(f64, PretrainModel, usize)> = None;
    let mut since_best = 0;
    let mut steps = 0;
    let mut status = TrainStatus::Completed;
    let mut epochs_run = 0;

    let evaluate = |model: &PretrainModel| -> Result<f64> {
        let (mut total, mut n) = (0.0, 0usize);
        for batch in batches(&val_refs, config.batch_size, min_batch) {
            let (segs, seeds) = loader.load(batch, VALIDATION_EPOCH)?;
            let refs: Vec<&[f32]> = segs.iter().map(Vec::as_slice).collect();
            total += model.loss(&refs, &seeds)?.loss * batch.len() as f64;
            n += batch.len();
        }
        Ok(total / n as f64)
    };

    'epochs: for epoch in 1..=max_epochs {
        train_refs.shuffle(&mut rng::stream(config.seed, &[tag::SHUFFLE, epoch as u64]));
        let mut all = batches(&train_refs, config.batch_size, min_batch);
        if let Some(cap) = config.max_batches_per_epoch {
            all.truncate(cap);
        }
        for batch in all {
            let (segs, seeds) = loader.load(batch, epoch as u64)?;
            let refs: Vec<&[f32]> = segs.iter().map(Vec::as_slice).collect();
            let out = match model.loss(&refs, &seeds) {
                Ok(o) => o,
                Err(e) if is_divergence(&e) => {
                    status = TrainStatus::Diverged { step: steps + 1 };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let finite = out.backbone_grads.iter().chain(&out.decoder_grads).all(|t| t.all_finite());
            if !finite {
                status = TrainStatus::Diverged { step: steps + 1 };
                break 'epochs;
            }
            let previous = model.clone();
            opt_b.step(model.backbone.params_mut(), &out.backbone_grads);
            if let (Some(opt), Some(dec)) = (opt_d.as_mut(), model.decoder.as_mut()) {
                opt.step(dec.params_mut(), &out.decoder_grads);
            }
            if !model.backbone.params().tensors().iter().all(|t| t.all_finite()) {
                model = previous;
                status = TrainStatus::Diverged { step: steps + 1 };
                break 'epochs;
            }
            steps += 1;
            let point = LossPoint { step: steps, epoch, loss: out.loss, split: Split::Train };
            observer(&point);
            curve.push(point);
        }
        epochs_run = epoch;
        if val_refs.len() >= min_batch {
            let v = match evaluate(&model) {
                Ok(v) => v,
                Err(e) if is_divergence(&e) => {
                    status = TrainStatus::Diverged { step: steps };
                    break;
                }
                Err(e) => return Err(e),
            };
            let point = LossPoint { step: steps, epoch, loss: v, split: Split::Validation };
            observer(&point);
            curve.push(point);
            if early {
                if best.as_ref().map_or(true, |(b, _, _)| v < *b) {
                    best = Some((v, model.clone(), epoch));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience {
                        status = TrainStatus::EarlyStopped { epoch };
                        break;
                    }
                }
            }
        }
    }

    let best_val_loss = best.as_ref().map(|b| b.0);
    let (model, kept_epoch) = match best {
        Some((_, m, e)) if early => (m, e),
        _ => (model, epochs_run),
    };
    Ok(PretrainOutcome {
        model,
        curve,
        status,
        epochs_run,
        steps,
        kept_epoch,
        best_val_loss,
    })
}

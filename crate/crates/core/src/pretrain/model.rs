use alloc::format;
use alloc::vec::Vec;

use super::{corrupt, loss_cl_loo, loss_cl_pairwise, sample_mask, Domain, PretrainObjective};
use super::losses::{freq_sums, time_sums};
use crate::autograd::{Graph, ParamStore, Span, Var};
use crate::backbone::{Backbone, BackboneConfig};
use crate::nn::Linear;
use crate::rng::{self, tag};
use crate::spectral::{amp_transform_unchecked, rdft_with, RealDft, SPECTRUM_BINS};
use crate::tensor::Tensor;
use crate::{Error, Result, PATCH_LEN};

/// Per-modality linear maps from tokens to 640 values per channel.
#[derive(Debug, Clone)]
pub struct Decoder {
    params: ParamStore,
    heads: Vec<Linear>,
}

const MODALITY_NAMES: [&str; 4] = ["bas", "resp", "ekg", "emg"];

impl Decoder {
    pub fn new(config: &BackboneConfig, seed: u64) -> Self {
        let mut params = ParamStore::new();
        let mut r = rng::stream(seed, &[tag::INIT, 0xDEC]);
        let heads = (0..4)
            .map(|m| {
                let name = format!("decoder.{}", MODALITY_NAMES[m]);
                Linear::new(&mut params, &name, config.d_model, config.channels[m] * PATCH_LEN, &mut r)
            })
            .collect();
        Self { params, heads }
    }

    pub fn from_params(config: &BackboneConfig, params: ParamStore) -> Result<Self> {
        let fresh = Self::new(config, 0);
        if !fresh.params.same_layout(&params) {
            return Err(Error::InvalidInput("decoder parameters do not match the config".into()));
        }
        Ok(Self { params, ..fresh })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}

/// Loss value and gradients for every backbone and decoder parameter.
#[derive(Debug, Clone)]
pub struct ObjectiveLoss {
    pub loss: f64,
    pub backbone_grads: Vec<Tensor>,
    pub decoder_grads: Vec<Tensor>,
}

/// Raw samples of the given channels, one row per (segment, patch).
pub fn time_targets(segments: &[&[f32]], patches: usize, channels: &[usize]) -> Tensor {
    let seq = patches * PATCH_LEN;
    let mut out = Tensor::zeros(segments.len() * patches, channels.len() * PATCH_LEN);
    for (si, seg) in segments.iter().enumerate() {
        for pi in 0..patches {
            let row = out.row_mut(si * patches + pi);
            for (k, &ch) in channels.iter().enumerate() {
                let src = &seg[ch * seq + pi * PATCH_LEN..ch * seq + (pi + 1) * PATCH_LEN];
                for (d, &s) in row[k * PATCH_LEN..(k + 1) * PATCH_LEN].iter_mut().zip(src) {
                    *d = s as f64;
                }
            }
        }
    }
    out
}

/// Transformed amplitudes then principal phases of the given channels.
pub fn freq_targets(segments: &[&[f32]], patches: usize, channels: &[usize]) -> Tensor {
    let dft = RealDft::new(PATCH_LEN);
    let mut out = time_targets(segments, patches, channels);
    let mut buf = alloc::vec![0.0; PATCH_LEN];
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for k in 0..channels.len() {
            let block = &mut row[k * PATCH_LEN..(k + 1) * PATCH_LEN];
            buf.copy_from_slice(block);
            let s = rdft_with(&dft, &buf);
            for i in 0..SPECTRUM_BINS {
                block[i] = amp_transform_unchecked(s.amplitude[i]);
                block[SPECTRUM_BINS + i] = s.phase[i];
            }
        }
    }
    out
}

/// A backbone with the decoder its objective needs.
#[derive(Debug, Clone)]
pub struct PretrainModel {
    pub objective: PretrainObjective,
    pub backbone: Backbone,
    /// Present for reconstruction objectives.
    pub decoder: Option<Decoder>,
    pub mask_ratio: f64,
    pub tau: f64,
}

impl PretrainModel {
    pub fn new(objective: PretrainObjective, backbone: Backbone, mask_ratio: f64, tau: f64) -> Self {
        let decoder = objective
            .domain()
            .map(|_| Decoder::new(backbone.config(), backbone.config().seed));
        Self {
            objective,
            backbone,
            decoder,
            mask_ratio,
            tau,
        }
    }

    /// Objective loss on a batch of channel-major segments. `seeds` drive the
    /// mask or corruption of each segment.
    pub fn loss(&self, segments: &[&[f32]], seeds: &[u64]) -> Result<ObjectiveLoss> {
        if segments.len() != seeds.len() {
            return Err(Error::shape("segment seeds", segments.len(), seeds.len()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let cfg = self.backbone.config();
        let patches = cfg.segment_patches;
        let n_ch: usize = cfg.channels.iter().sum();
        let mut g = Graph::new();
        let bb = g.bind(self.backbone.params(), true);
        let obj = self.objective;

        let masks = if obj.is_masked() {
            Some(
                seeds
                    .iter()
                    .map(|&s| sample_mask(n_ch, patches, self.mask_ratio, s))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let noisy: Option<Vec<Vec<f32>>> = obj
            .is_denoising()
            .then(|| segments.iter().zip(seeds).map(|(s, &seed)| corrupt(s, n_ch, seed).0).collect());
        let inputs: Vec<&[f32]> = match &noisy {
            Some(v) => v.iter().map(Vec::as_slice).collect(),
            None => segments.to_vec(),
        };
        let mask_refs: Option<Vec<&[bool]>> = masks.as_ref().map(|m| m.iter().map(|p| p.mask.as_slice()).collect());
        let out = self
            .backbone
            .forward(&mut g, &bb, &inputs, patches, mask_refs.as_deref())?;

        let (loss_var, dec_bound) = match obj.domain() {
            None => {
                let spans = Span::uniform(segments.len(), patches);
                let pooled: Vec<Var> = out.modalities.iter().map(|&v| g.mean_rows(v, &spans)).collect();
                let values: Vec<Tensor> = pooled.iter().map(|&v| g.value(v).clone()).collect();
                let (loss, grads) = if obj == PretrainObjective::ClPairwise {
                    loss_cl_pairwise(&values, self.tau)?
                } else {
                    loss_cl_loo(&values, self.tau)?
                };
                let all = g.concat_cols(&pooled);
                (g.fused_scalar(all, loss, concat_cols(&grads)), None)
            }
            Some(domain) => {
                let dec = self
                    .decoder
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("reconstruction objective without decoder".into()))?;
                let db = g.bind(&dec.params, true);
                let mut preds = Vec::with_capacity(4);
                let mut grads = Vec::with_capacity(4);
                let (mut sum, mut count) = (0.0, 0usize);
                for (m, chans) in self.backbone.groups().iter().enumerate() {
                    let pred = dec.heads[m].forward(&mut g, &db, out.modalities[m]);
                    let include: Option<Vec<bool>> = obj.masked_loss().then(|| {
                        let plans = masks.as_ref().expect("masked objectives sample masks");
                        let mut inc = Vec::with_capacity(segments.len() * patches * chans.len());
                        for plan in plans {
                            for pi in 0..patches {
                                inc.extend(chans.iter().map(|&ch| plan.is_masked(ch, pi)));
                            }
                        }
                        inc
                    });
                    let s = match domain {
                        Domain::Time => {
                            let t = time_targets(segments, patches, chans);
                            time_sums(g.value(pred), &t, include.as_deref())?
                        }
                        Domain::Freq => {
                            let t = freq_targets(segments, patches, chans);
                            freq_sums(g.value(pred), &t, include.as_deref())?.0
                        }
                    };
                    sum += s.sum;
                    count += s.count;
                    preds.push(pred);
                    grads.push(s.grad);
                }
                if count == 0 {
                    return Err(Error::EmptyMask);
                }
                let n = count as f64;
                let mut grad = concat_cols(&grads);
                grad.scale(1.0 / n);
                let all = g.concat_cols(&preds);
                (g.fused_scalar(all, sum / n, grad), Some(db))
            }
        };
        let loss = g.value(loss_var).item();
        if !loss.is_finite() {
            return Err(Error::NonFinite { term: "pretraining loss" });
        }
        let grads = g.backward(loss_var);
        Ok(ObjectiveLoss {
            loss,
            backbone_grads: grads.collect(&g, &bb),
            decoder_grads: dec_bound.map(|b| grads.collect(&g, &b)).unwrap_or_default(),
        })
    }
}

fn concat_cols(parts: &[Tensor]) -> Tensor {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(Tensor::cols).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut off = 0;
        let dst = out.row_mut(r);
        for p in parts {
            dst[off..off + p.cols()].copy_from_slice(p.row(r));
            off += p.cols();
        }
    }
    out
}

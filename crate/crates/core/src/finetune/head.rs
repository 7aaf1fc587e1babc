use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::losses::{age_prediction, sigmoid};
use super::Task;
use crate::autograd::{Bound, Graph, ParamStore, Span, Var};
use crate::nn::{BiLstm, Linear, TransformerLayer};
use crate::rng::{self, tag};
use crate::tensor::Tensor;
use crate::{Error, Result, MAX_RECORD_PATCHES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub task: Task,
    /// Width of the incoming patch embeddings.
    pub d_in: usize,
    /// Transformer width and LSTM hidden size.
    pub width: usize,
    pub transformer_layers: usize,
    pub transformer_heads: usize,
    pub lstm_layers: usize,
    /// Heads of the pooling transformer layer (record-level tasks).
    pub pool_heads: usize,
    pub mlp_ratio: usize,
    pub max_patches: usize,
    pub seed: u64,
}

impl HeadConfig {
    pub fn new(task: Task, d_in: usize, width: usize) -> Self {
        Self {
            task,
            d_in,
            width,
            transformer_layers: 2,
            transformer_heads: 4,
            lstm_layers: 2,
            pool_heads: 8,
            mlp_ratio: 4,
            max_patches: MAX_RECORD_PATCHES,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.width == 0 {
            return Err(Error::config("width", "must be positive"));
        }
        if self.transformer_heads == 0 || self.width % self.transformer_heads != 0 {
            return Err(Error::config("transformer_heads", "must divide the width"));
        }
        if self.pool_heads == 0 || (2 * self.width) % self.pool_heads != 0 {
            return Err(Error::config("pool_heads", "must divide twice the width"));
        }
        if self.lstm_layers == 0 || self.max_patches == 0 || self.mlp_ratio == 0 {
            return Err(Error::config("lstm_layers", "layers, mlp_ratio and max_patches must be positive"));
        }
        Ok(())
    }
}

/// Feature-wise standardization fitted on training embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; width],
            inv_std: alloc::vec![1.0; width],
        }
    }

    pub fn fit<'a>(width: usize, rows: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let mut sum = alloc::vec![0.0; width];
        let mut sq = alloc::vec![0.0; width];
        let mut n = 0usize;
        for t in rows {
            for r in 0..t.rows() {
                for (j, &v) in t.row(r).iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity(width);
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let inv_std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = libm::sqrt((q / n - m * m).max(0.0));
                if sd > 1e-12 { 1.0 / sd } else { 1.0 }
            })
            .collect();
        Self { mean, inv_std }
    }

    fn apply(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, v)) in out.iter_mut().zip(row).enumerate() {
            *o = (v - self.mean[j]) * self.inv_std[j];
        }
    }
}

#[derive(Debug, Clone)]
enum Output {
    PerPatch(Linear),
    PerRecord {
        layer: TransformerLayer,
        score: Linear,
        out: Linear,
    },
}

/// Task head over frozen patch embeddings.
#[derive(Debug, Clone)]
pub struct TaskHead {
    config: HeadConfig,
    params: ParamStore,
    scaler: FeatureScaler,
    input: Linear,
    layers: Vec<TransformerLayer>,
    lstm: Vec<BiLstm>,
    output: Output,
}

impl TaskHead {
    pub fn new(config: HeadConfig, scaler: FeatureScaler) -> Result<Self> {
        config.validate()?;
        if scaler.mean.len() != config.d_in {
            return Err(Error::shape("feature scaler", config.d_in, scaler.mean.len()));
        }
        let mut params = ParamStore::new();
        let mut r = rng::stream(config.seed, &[tag::HEAD_INIT]);
        let w = config.width;
        let input = Linear::new(&mut params, "head.input", config.d_in, w, &mut r);
        let layers = (0..config.transformer_layers)
            .map(|l| TransformerLayer::new(&mut params, &format!("head.layer{l}"), w, config.transformer_heads, config.mlp_ratio, &mut r))
            .collect();
        let lstm = (0..config.lstm_layers)
            .map(|l| BiLstm::new(&mut params, &format!("head.lstm{l}"), if l == 0 { w } else { 2 * w }, w, &mut r))
            .collect();
        let k = config.task.output_width();
        let output = match config.task {
            Task::Staging => Output::PerPatch(Linear::new(&mut params, "head.out", 2 * w, k, &mut r)),
            _ => Output::PerRecord {
                layer: TransformerLayer::new(&mut params, "head.pool_layer", 2 * w, config.pool_heads, config.mlp_ratio, &mut r),
                score: Linear::new(&mut params, "head.pool_score", 2 * w, 1, &mut r),
                out: Linear::new(&mut params, "head.out", 2 * w, k, &mut r),
            },
        };
        Ok(Self { config, params, scaler, input, layers, lstm, output })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    /// Positions used from a record of `n` patches.
    pub fn used_len(&self, n: usize) -> usize {
        n.min(self.config.max_patches)
    }

    /// Raw outputs: `[Σ T × 5]` logits for staging (records stacked), else
    /// `[records × width]`. Positions past `max_patches` are dropped; shorter
    /// records are never padded, so no padded position enters attention,
    /// recurrence or pooling.
    pub fn forward(&self, g: &mut Graph, p: &Bound, records: &[&Tensor]) -> Result<Var> {
        if records.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut spans = Vec::with_capacity(records.len());
        let mut start = 0;
        for r in records {
            if r.cols() != self.config.d_in {
                return Err(Error::shape("patch embeddings", self.config.d_in, r.cols()));
            }
            let t = self.used_len(r.rows());
            if t == 0 {
                return Err(Error::InvalidInput("record without patches".into()));
            }
            spans.push(Span::new(start, t));
            start += t;
        }
        let mut x = Tensor::zeros(start, self.config.d_in);
        for (r, span) in records.iter().zip(&spans) {
            for i in 0..span.len {
                self.scaler.apply(r.row(i), x.row_mut(span.start + i));
            }
        }
        let x = g.constant(x);
        let mut h = self.input.forward(g, p, x);
        for layer in &self.layers {
            h = layer.forward(g, p, h, &spans);
        }
        for l in &self.lstm {
            h = l.forward(g, p, h, &spans);
        }
        Ok(match &self.output {
            Output::PerPatch(lin) => lin.forward(g, p, h),
            Output::PerRecord { layer, score, out } => {
                let h = layer.forward(g, p, h, &spans);
                let s = score.forward(g, p, h);
                let pooled = g.attn_pool(h, s, &spans);
                out.forward(g, p, pooled)
            }
        })
    }

    /// Per-record predictions: stage probabilities `[T × 5]`, apnea
    /// probability, age in years, or 13 hazards.
    pub fn predict(&self, records: &[&Tensor]) -> Result<Vec<Tensor>> {
        let mut g = Graph::new();
        let p = g.bind(&self.params, false);
        let out = self.forward(&mut g, &p, records)?;
        let v = g.value(out);
        let mut preds = Vec::with_capacity(records.len());
        let mut offset = 0;
        for (i, r) in records.iter().enumerate() {
            preds.push(match self.config.task {
                Task::Staging => {
                    let t = self.used_len(r.rows());
                    let mut probs = Tensor::zeros(t, 5);
                    for k in 0..t {
                        let row = v.row(offset + k);
                        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                        let z: f64 = row.iter().map(|x| libm::exp(x - max)).sum();
                        for (d, x) in probs.row_mut(k).iter_mut().zip(row) {
                            *d = libm::exp(x - max) / z;
                        }
                    }
                    offset += t;
                    probs
                }
                Task::Apnea => Tensor::scalar(sigmoid(v.get(i, 0))),
                Task::Age => Tensor::scalar(100.0 * age_prediction(v.get(i, 0))),
                Task::Survival => Tensor::from_vec(1, v.cols(), v.row(i).to_vec()),
            });
        }
        Ok(preds)
    }
}

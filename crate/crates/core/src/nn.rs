//! Parameterized layers shared by the backbone and the task heads.

use alloc::format;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};

use crate::autograd::{Bound, Graph, ParamId, ParamStore, Span, Var};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// `rows × cols` Gaussian tensor with the given standard deviation.
pub fn normal_tensor(rng: &mut Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Affine map `x · W + b` with `W` of shape `[fan_in × fan_out]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Weights drawn from `N(0, 1/fan_in)`, zero bias.
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / libm::sqrt(fan_in as f64);
        Self {
            w: store.add(format!("{name}.w"), normal_tensor(rng, fan_in, fan_out, std)),
            b: store.add(format!("{name}.b"), Tensor::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        g.linear(x, p.var(self.w), p.var(self.b))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::filled(1, width, 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(1, width)),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        g.layer_norm(x, p.var(self.gamma), p.var(self.beta))
    }
}

/// Pre-norm transformer encoder layer: attention and a GELU MLP, each in a
/// residual branch behind a layer norm.
#[derive(Debug, Clone, Copy)]
pub struct TransformerLayer {
    pub heads: usize,
    ln1: LayerNorm,
    qkv: Linear,
    proj: Linear,
    ln2: LayerNorm,
    mlp_in: Linear,
    mlp_out: Linear,
}

impl TransformerLayer {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, mlp_ratio: usize, rng: &mut Rng) -> Self {
        assert!(heads > 0 && width % heads == 0, "heads must divide width");
        Self {
            heads,
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), width),
            qkv: Linear::new(store, &format!("{name}.qkv"), width, 3 * width, rng),
            proj: Linear::new(store, &format!("{name}.proj"), width, width, rng),
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), width),
            mlp_in: Linear::new(store, &format!("{name}.mlp_in"), width, mlp_ratio * width, rng),
            mlp_out: Linear::new(store, &format!("{name}.mlp_out"), mlp_ratio * width, width, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, seqs: &[Span]) -> Var {
        let h = self.ln1.forward(g, p, x);
        let qkv = self.qkv.forward(g, p, h);
        let a = g.attention(qkv, self.heads, seqs);
        let a = self.proj.forward(g, p, a);
        let x = g.add(x, a);
        let h = self.ln2.forward(g, p, x);
        let h = self.mlp_in.forward(g, p, h);
        let h = g.gelu(h);
        let h = self.mlp_out.forward(g, p, h);
        g.add(x, h)
    }
}

/// Bidirectional LSTM layer; the output concatenates the forward and
/// backward hidden states (`2 × hidden` wide).
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub hidden: usize,
    fwd_in: Linear,
    fwd_hh: ParamId,
    bwd_in: Linear,
    bwd_hh: ParamId,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / libm::sqrt(hidden as f64);
        let fwd_in = Linear::new(store, &format!("{name}.fwd.ih"), input, 4 * hidden, rng);
        let fwd_hh = store.add(format!("{name}.fwd.hh"), normal_tensor(rng, hidden, 4 * hidden, std));
        let bwd_in = Linear::new(store, &format!("{name}.bwd.ih"), input, 4 * hidden, rng);
        let bwd_hh = store.add(format!("{name}.bwd.hh"), normal_tensor(rng, hidden, 4 * hidden, std));
        Self { hidden, fwd_in, fwd_hh, bwd_in, bwd_hh }
    }

    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, seqs: &[Span]) -> Var {
        let xf = self.fwd_in.forward(g, p, x);
        let f = g.lstm(xf, p.var(self.fwd_hh), seqs, false);
        let xb = self.bwd_in.forward(g, p, x);
        let b = g.lstm(xb, p.var(self.bwd_hh), seqs, true);
        g.concat_cols(&[f, b])
    }
}

/// Sinusoidal encoding of one position: `sin` on even, `cos` on odd
/// dimensions, frequency `10000^(-2i/d)` for pair `i`.
pub fn sinusoidal(position: usize, width: usize) -> Vec<f64> {
    (0..width)
        .map(|j| {
            let pair = (j / 2) as f64;
            let angle = position as f64 / libm::pow(10_000.0, 2.0 * pair / width as f64);
            if j % 2 == 0 {
                libm::sin(angle)
            } else {
                libm::cos(angle)
            }
        })
        .collect()
}

/// Positional encodings for `count` sequences of `len` positions, stacked.
pub fn positional_table(count: usize, len: usize, width: usize) -> Tensor {
    let one: Vec<f64> = (0..len).flat_map(|p| sinusoidal(p, width)).collect();
    let mut data = Vec::with_capacity(count * one.len());
    for _ in 0..count {
        data.extend_from_slice(&one);
    }
    Tensor::from_vec(count * len, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_closed_forms() {
        let p0 = sinusoidal(0, 8);
        for (j, v) in p0.iter().enumerate() {
            assert_eq!(*v, if j % 2 == 0 { 0.0 } else { 1.0 });
        }
        for p in 0..60 {
            for q in 0..p {
                assert_ne!(sinusoidal(p, 32), sinusoidal(q, 32));
            }
        }
        let t = positional_table(3, 5, 4);
        assert_eq!(t.row(7), &sinusoidal(2, 4)[..]);
    }
}

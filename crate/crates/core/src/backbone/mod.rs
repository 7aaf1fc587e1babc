//! Shared encoder: per-modality CNN patch encoders, sinusoidal positions and
//! per-modality temporal transformers, concatenated BAS ‖ RESP ‖ EKG ‖ EMG.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::autograd::{Bound, ConvGeometry, Graph, ParamId, ParamStore, Span, Var};
use crate::data::{ChannelLayout, Modality};
use crate::nn::{normal_tensor, positional_table, LayerNorm, Linear, TransformerLayer};
use crate::rng::{self, tag};
use crate::tensor::Tensor;
use crate::{Error, Result, PATCH_LEN, SEGMENT_PATCHES};

/// Kernel, stride and padding of the four conv blocks; the strides multiply
/// to 640 so each patch becomes one token.
pub const CONV_BLOCKS: [(usize, usize, usize); 4] = [(7, 4, 3), (7, 4, 3), (7, 4, 3), (10, 10, 0)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub patch_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub mlp_ratio: usize,
    /// Input channels per modality, BAS, RESP, EKG, EMG.
    pub channels: [usize; 4],
    pub segment_patches: usize,
    pub seed: u64,
}

impl BackboneConfig {
    pub fn paper() -> Self {
        Self {
            patch_len: PATCH_LEN,
            d_model: 128,
            n_heads: 8,
            n_layers: 6,
            mlp_ratio: 4,
            channels: [8, 5, 1, 2],
            segment_patches: SEGMENT_PATCHES,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        Self {
            d_model: 32,
            n_heads: 4,
            n_layers: 2,
            ..Self::paper()
        }
    }

    /// Gradient-check scale: width 8, one layer, 4 patches per segment.
    pub fn tiny() -> Self {
        Self {
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            segment_patches: 4,
            ..Self::paper()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Width of the concatenated embedding.
    pub fn embed_dim(&self) -> usize {
        4 * self.d_model
    }

    pub fn conv_widths(&self) -> [usize; 4] {
        let d = self.d_model;
        [(d / 4).max(1), (d / 2).max(1), d, d]
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::config("d_model", "must be a positive multiple of n_heads"));
        }
        if self.n_layers == 0 || self.mlp_ratio == 0 {
            return Err(Error::config("n_layers", "layers and mlp_ratio must be positive"));
        }
        if self.patch_len != PATCH_LEN {
            return Err(Error::config("patch_len", format!("the conv stack maps exactly {PATCH_LEN} samples")));
        }
        if self.segment_patches == 0 {
            return Err(Error::config("segment_patches", "must be positive"));
        }
        if self.channels.contains(&0) {
            return Err(Error::config("channels", "every modality needs a channel"));
        }
        Ok(())
    }

    pub fn check_layout(&self, layout: &ChannelLayout) -> Result<()> {
        for m in Modality::ALL {
            let n = layout.channels_of(m).len();
            if n != self.channels[m.index()] {
                return Err(Error::config(
                    "channels",
                    format!("{m} has {n} channels in the layout but {} in the config", self.channels[m.index()]),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ConvBlock {
    geom_kernel: usize,
    stride: usize,
    pad: usize,
    lin: Linear,
    norm: LayerNorm,
}

#[derive(Debug, Clone)]
struct ModalityEncoder {
    conv: Vec<ConvBlock>,
    mask_token: ParamId,
    layers: Vec<TransformerLayer>,
    final_norm: LayerNorm,
}

/// Backbone weights plus the layer structure that indexes into them.
#[derive(Debug, Clone)]
pub struct Backbone {
    config: BackboneConfig,
    params: ParamStore,
    encoders: Vec<ModalityEncoder>,
    groups: [Vec<usize>; 4],
}

/// Graph handles produced by [`Backbone::forward`]; every tensor has one row
/// per (segment, patch), segments outermost.
#[derive(Debug, Clone, Copy)]
pub struct BackboneVars {
    pub modalities: [Var; 4],
    pub concat: Var,
}

impl Backbone {
    /// Deterministic initialization from `config.seed`.
    pub fn new(config: BackboneConfig, layout: &ChannelLayout) -> Result<Self> {
        config.validate()?;
        config.check_layout(layout)?;
        let mut r = rng::stream(config.seed, &[tag::INIT]);
        let mut params = ParamStore::new();
        let widths = config.conv_widths();
        let d = config.d_model;
        let mut encoders = Vec::with_capacity(4);
        for m in Modality::ALL {
            let name = m.name().to_lowercase();
            let mut c_in = config.channels[m.index()];
            let mut conv = Vec::with_capacity(4);
            for (i, &(kernel, stride, pad)) in CONV_BLOCKS.iter().enumerate() {
                let c_out = widths[i];
                conv.push(ConvBlock {
                    geom_kernel: kernel,
                    stride,
                    pad,
                    lin: Linear::new(&mut params, &format!("{name}.conv{i}"), kernel * c_in, c_out, &mut r),
                    norm: LayerNorm::new(&mut params, &format!("{name}.conv{i}.norm"), c_out),
                });
                c_in = c_out;
            }
            let mask_token = params.add(format!("{name}.mask_token"), normal_tensor(&mut r, 1, d, 0.02));
            let layers = (0..config.n_layers)
                .map(|l| TransformerLayer::new(&mut params, &format!("{name}.layer{l}"), d, config.n_heads, config.mlp_ratio, &mut r))
                .collect();
            let final_norm = LayerNorm::new(&mut params, &format!("{name}.norm"), d);
            encoders.push(ModalityEncoder {
                conv,
                mask_token,
                layers,
                final_norm,
            });
        }
        let groups = Modality::ALL.map(|m| layout.channels_of(m));
        Ok(Self {
            config,
            params,
            encoders,
            groups,
        })
    }

    /// Rebuilds the structure for `config` and installs saved weights.
    pub fn from_params(config: BackboneConfig, layout: &ChannelLayout, params: ParamStore) -> Result<Self> {
        let mut b = Self::new(config, layout)?;
        if !b.params.same_layout(&params) {
            return Err(Error::InvalidInput("checkpoint tensors do not match the backbone config".into()));
        }
        b.params = params;
        Ok(b)
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Channel indices of each modality in layout order.
    pub fn groups(&self) -> &[Vec<usize>; 4] {
        &self.groups
    }

    /// Encodes a batch of segments. Each segment is channel-major
    /// `[channels × patches·640]`; `masks`, when given, holds per segment a
    /// channel-major `[channels × patches]` flag set. Masked channel-patches
    /// are zeroed before encoding and each token is pulled toward the
    /// modality's mask token by the fraction of its channels that are masked
    /// (fully masked tokens become the mask token).
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        segments: &[&[f32]],
        patches: usize,
        masks: Option<&[&[bool]]>,
    ) -> Result<BackboneVars> {
        let n_ch: usize = self.config.channels.iter().sum();
        let seq_len = patches * PATCH_LEN;
        if segments.is_empty() || patches == 0 {
            return Err(Error::InvalidInput("empty backbone batch".into()));
        }
        for s in segments {
            if s.len() != n_ch * seq_len {
                return Err(Error::shape("backbone segment", n_ch * seq_len, s.len()));
            }
        }
        if let Some(m) = masks {
            if m.len() != segments.len() || m.iter().any(|x| x.len() != n_ch * patches) {
                return Err(Error::shape("mask plan", n_ch * patches, m.first().map_or(0, |x| x.len())));
            }
        }
        let b = segments.len();
        let d = self.config.d_model;
        let spans = Span::uniform(b, patches);
        let pos = g.constant(positional_table(b, patches, d));
        let mut outs = Vec::with_capacity(4);
        for (mi, enc) in self.encoders.iter().enumerate() {
            let chans = &self.groups[mi];
            let c = chans.len();
            let mut x = Tensor::zeros(b * seq_len, c);
            let mut weights = alloc::vec![0.0; b * patches];
            for (si, seg) in segments.iter().enumerate() {
                let mask = masks.map(|m| m[si]);
                let data = x.data_mut();
                for (k, &ch) in chans.iter().enumerate() {
                    let src = &seg[ch * seq_len..(ch + 1) * seq_len];
                    for pi in 0..patches {
                        if mask.is_some_and(|m| m[ch * patches + pi]) {
                            weights[si * patches + pi] += 1.0 / c as f64;
                            continue;
                        }
                        let base = (si * seq_len + pi * PATCH_LEN) * c + k;
                        for (t, &v) in src[pi * PATCH_LEN..(pi + 1) * PATCH_LEN].iter().enumerate() {
                            data[base + t * c] = v as f64;
                        }
                    }
                }
            }
            let mut h = g.constant(x);
            let mut len = PATCH_LEN;
            let mut c_in = c;
            for block in &enc.conv {
                let geom = ConvGeometry {
                    count: b * patches,
                    len,
                    channels: c_in,
                    kernel: block.geom_kernel,
                    stride: block.stride,
                    pad: block.pad,
                };
                let cols = g.unfold(h, geom);
                let y = block.lin.forward(g, p, cols);
                let y = block.norm.forward(g, p, y);
                h = g.gelu(y);
                len = geom.out_len();
                c_in = g.value(h).cols();
            }
            debug_assert_eq!(len, 1);
            if weights.iter().any(|&w| w > 0.0) {
                h = g.blend_rows(h, p.var(enc.mask_token), &weights);
            }
            h = g.add(h, pos);
            for layer in &enc.layers {
                h = layer.forward(g, p, h, &spans);
            }
            outs.push(enc.final_norm.forward(g, p, h));
        }
        let concat = g.concat_cols(&outs);
        Ok(BackboneVars {
            modalities: [outs[0], outs[1], outs[2], outs[3]],
            concat,
        })
    }

    /// Frozen forward pass returning the concatenated embeddings
    /// `[segments·patches × 4·d_model]`.
    pub fn embed(&self, segments: &[&[f32]], patches: usize) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = g.bind(&self.params, false);
        let out = self.forward(&mut g, &p, segments, patches, None)?;
        Ok(g.value(out.concat).clone())
    }
}

use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, tag};

pub const NOISE_PROBABILITY: f64 = 0.5;
pub const NOISE_SCALE_RANGE: (f64, f64) = (0.01, 0.3);

/// Per-channel additive Gaussian noise for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub flags: Vec<bool>,
    /// Relative scale `u`, drawn for every channel (used only when flagged).
    pub scale: Vec<f64>,
    /// Absolute noise standard deviation `u · max|x|`; 0 for clean channels.
    pub std: Vec<f64>,
    pub seed: u64,
}

/// Draws the plan for `channels` channel buffers of `segment` (channel-major).
pub fn plan_corruption(segment: &[f32], channels: usize, seed: u64) -> CorruptionPlan {
    let len = segment.len() / channels.max(1);
    let mut r = rng::stream(seed, &[tag::CORRUPT]);
    let mut flags = Vec::with_capacity(channels);
    let mut scale = Vec::with_capacity(channels);
    let mut std = Vec::with_capacity(channels);
    for ch in 0..channels {
        let flag = r.gen::<f64>() < NOISE_PROBABILITY;
        let u = r.gen_range(NOISE_SCALE_RANGE.0..=NOISE_SCALE_RANGE.1);
        let peak = segment[ch * len..(ch + 1) * len].iter().fold(0.0f64, |m, v| m.max((*v as f64).abs()));
        flags.push(flag);
        scale.push(u);
        std.push(if flag { u * peak } else { 0.0 });
    }
    CorruptionPlan { flags, scale, std, seed }
}

/// Applies a plan: fresh noise per channel from the plan's seed.
pub fn apply_corruption(segment: &[f32], plan: &CorruptionPlan) -> Vec<f32> {
    let channels = plan.flags.len();
    let len = segment.len() / channels.max(1);
    let mut out = segment.to_vec();
    for ch in 0..channels {
        if !plan.flags[ch] || plan.std[ch] == 0.0 {
            continue;
        }
        let mut r = rng::stream(plan.seed, &[tag::CORRUPT, ch as u64]);
        for v in &mut out[ch * len..(ch + 1) * len] {
            let n: f64 = StandardNormal.sample(&mut r);
            *v = (*v as f64 + plan.std[ch] * n) as f32;
        }
    }
    out
}

/// Plans and applies corruption; the clean segment stays the target.
pub fn corrupt(segment: &[f32], channels: usize, seed: u64) -> (Vec<f32>, CorruptionPlan) {
    let plan = plan_corruption(segment, channels, seed);
    (apply_corruption(segment, &plan), plan)
}

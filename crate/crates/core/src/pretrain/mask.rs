use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::{self, tag};
use crate::{Error, Result};

/// Default masking ratio.
pub const MASK_RATIO: f64 = 0.34;

/// Channel-major `[channels × patches]` mask; `true` means hidden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub channels: usize,
    pub patches: usize,
    pub mask: Vec<bool>,
    pub seed: u64,
}

impl MaskPlan {
    pub fn is_masked(&self, channel: usize, patch: usize) -> bool {
        self.mask[channel * self.patches + patch]
    }

    pub fn count_in_channel(&self, channel: usize) -> usize {
        self.mask[channel * self.patches..(channel + 1) * self.patches]
            .iter()
            .filter(|m| **m)
            .count()
    }

    pub fn none(channels: usize, patches: usize) -> Self {
        Self {
            channels,
            patches,
            mask: vec![false; channels * patches],
            seed: 0,
        }
    }
}

/// Patches masked per channel: `ratio × patches` rounded half up.
pub fn masked_count(ratio: f64, patches: usize) -> usize {
    libm::floor(ratio * patches as f64 + 0.5) as usize
}

/// Independently per channel, a uniform draw without replacement of
/// `masked_count(ratio, patches)` patches.
pub fn sample_mask(channels: usize, patches: usize, ratio: f64, seed: u64) -> Result<MaskPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("mask_ratio", "must lie in (0, 1)"));
    }
    let k = masked_count(ratio, patches);
    let mut mask = vec![false; channels * patches];
    for ch in 0..channels {
        let mut r = rng::stream(seed, &[tag::MASK, ch as u64]);
        for i in index::sample(&mut r, patches, k) {
            mask[ch * patches + i] = true;
        }
    }
    Ok(MaskPlan {
        channels,
        patches,
        mask,
        seed,
    })
}

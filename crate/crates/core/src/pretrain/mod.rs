//! Self-supervised pretraining: masking, corruption, the eight objectives
//! and a trainer with early stopping.

mod corrupt;
mod losses;
mod mask;
mod model;
mod trainer;

pub use corrupt::{
    apply_corruption, corrupt, plan_corruption, CorruptionPlan, NOISE_PROBABILITY, NOISE_SCALE_RANGE,
};
pub use losses::{
    freq_sums, loss_cl_loo, loss_cl_pairwise, loss_freq, loss_time, phase_term, time_sums, LossSums,
    DEFAULT_TAU, PHASE_LIMIT,
};
pub use mask::{masked_count, sample_mask, MaskPlan, MASK_RATIO};
pub use model::{freq_targets, time_targets, Decoder, ObjectiveLoss, PretrainModel};
pub use trainer::{pretrain, PretrainConfig, PretrainOutcome, SegmentRef, StopRule};

use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainObjective {
    MaeTimeAll,
    MaeTimeMasked,
    MaeFreqAll,
    MaeFreqMasked,
    DaeTime,
    DaeFreq,
    ClPairwise,
    ClLoo,
}

/// Reconstruction target domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Freq,
}

impl PretrainObjective {
    pub const ALL: [PretrainObjective; 8] = [
        PretrainObjective::MaeTimeAll,
        PretrainObjective::MaeTimeMasked,
        PretrainObjective::MaeFreqAll,
        PretrainObjective::MaeFreqMasked,
        PretrainObjective::DaeTime,
        PretrainObjective::DaeFreq,
        PretrainObjective::ClPairwise,
        PretrainObjective::ClLoo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PretrainObjective::MaeTimeAll => "mae_time_all",
            PretrainObjective::MaeTimeMasked => "mae_time_masked",
            PretrainObjective::MaeFreqAll => "mae_freq_all",
            PretrainObjective::MaeFreqMasked => "mae_freq_masked",
            PretrainObjective::DaeTime => "dae_time",
            PretrainObjective::DaeFreq => "dae_freq",
            PretrainObjective::ClPairwise => "cl_pairwise",
            PretrainObjective::ClLoo => "cl_loo",
        }
    }

    /// Reconstruction domain, `None` for contrastive objectives.
    pub fn domain(self) -> Option<Domain> {
        use PretrainObjective::*;
        match self {
            MaeTimeAll | MaeTimeMasked | DaeTime => Some(Domain::Time),
            MaeFreqAll | MaeFreqMasked | DaeFreq => Some(Domain::Freq),
            ClPairwise | ClLoo => None,
        }
    }

    pub fn is_masked(self) -> bool {
        use PretrainObjective::*;
        matches!(self, MaeTimeAll | MaeTimeMasked | MaeFreqAll | MaeFreqMasked)
    }

    /// Loss restricted to masked channel-patches.
    pub fn masked_loss(self) -> bool {
        matches!(self, PretrainObjective::MaeTimeMasked | PretrainObjective::MaeFreqMasked)
    }

    pub fn is_denoising(self) -> bool {
        matches!(self, PretrainObjective::DaeTime | PretrainObjective::DaeFreq)
    }

    pub fn is_contrastive(self) -> bool {
        self.domain().is_none()
    }
}

impl fmt::Display for PretrainObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PretrainObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown objective `{s}`")))
    }
}

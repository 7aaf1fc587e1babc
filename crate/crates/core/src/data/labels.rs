use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Sleep stage of one 5 s patch. Serialized as `u8` (0 Wake, 1 N1, 2 N2,
/// 3 N3, 4 REM).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum SleepStage {
    Wake = 0,
    N1 = 1,
    N2 = 2,
    N3 = 3,
    Rem = 4,
}

impl SleepStage {
    pub const ALL: [SleepStage; 5] = [
        SleepStage::Wake,
        SleepStage::N1,
        SleepStage::N2,
        SleepStage::N3,
        SleepStage::Rem,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SleepStage::Wake => "Wake",
            SleepStage::N1 => "N1",
            SleepStage::N2 => "N2",
            SleepStage::N3 => "N3",
            SleepStage::Rem => "REM",
        }
    }
}

impl From<SleepStage> for u8 {
    fn from(s: SleepStage) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for SleepStage {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self, Error> {
        SleepStage::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::InvalidInput(alloc::format!("invalid stage code {v}")))
    }
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The 12 diseases followed by all-cause death, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeId {
    /// Myocardial infarction.
    MI,
    /// Heart failure.
    HF,
    /// Atrial fibrillation and flutter.
    AF,
    /// General atherosclerosis.
    GA,
    /// Angina.
    AN,
    /// Hypertension.
    HT,
    /// Hypotension.
    HPT,
    /// Pulmonary heart disease.
    PHD,
    /// Ischemic heart disease.
    IHD,
    /// Chronic kidney disease.
    CKD,
    /// Type 2 diabetes.
    T2D,
    /// Dementia.
    DEM,
    Death,
}

impl OutcomeId {
    pub const ALL: [OutcomeId; 13] = [
        OutcomeId::MI,
        OutcomeId::HF,
        OutcomeId::AF,
        OutcomeId::GA,
        OutcomeId::AN,
        OutcomeId::HT,
        OutcomeId::HPT,
        OutcomeId::PHD,
        OutcomeId::IHD,
        OutcomeId::CKD,
        OutcomeId::T2D,
        OutcomeId::DEM,
        OutcomeId::Death,
    ];
    pub const COUNT: usize = 13;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_disease(self) -> bool {
        self != OutcomeId::Death
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeId::MI => "MI",
            OutcomeId::HF => "HF",
            OutcomeId::AF => "AF",
            OutcomeId::GA => "GA",
            OutcomeId::AN => "AN",
            OutcomeId::HT => "HT",
            OutcomeId::HPT => "HPT",
            OutcomeId::PHD => "PHD",
            OutcomeId::IHD => "IHD",
            OutcomeId::CKD => "CKD",
            OutcomeId::T2D => "T2D",
            OutcomeId::DEM => "DEM",
            OutcomeId::Death => "Death",
        }
    }
}

mod event_flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(serde::de::Error::custom(alloc::format!(
                "event must be 0 or 1, got {v}"
            ))),
        }
    }
}

/// Event indicator and time for one clinical outcome. When `event` is false,
/// `time_days` is the censoring time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOutcome {
    pub outcome_id: OutcomeId,
    #[serde(with = "event_flag")]
    pub event: bool,
    pub time_days: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub hypnogram: Vec<SleepStage>,
    pub ahi: f64,
    pub age_years: f64,
    pub survival: Vec<SurvivalOutcome>,
}

/// AHI at or above this value is apnea-positive.
pub const APNEA_AHI_THRESHOLD: f64 = 15.0;

impl LabelSet {
    pub fn apnea(&self) -> bool {
        self.ahi >= APNEA_AHI_THRESHOLD
    }

    /// Age scaled so 0 years maps to 0 and 100 years to 1.
    pub fn age_norm(&self) -> f64 {
        self.age_years / 100.0
    }

    pub fn outcome(&self, id: OutcomeId) -> Option<&SurvivalOutcome> {
        self.survival.iter().find(|o| o.outcome_id == id)
    }

    pub fn fraction_of(&self, stage: SleepStage) -> f64 {
        if self.hypnogram.is_empty() {
            return 0.0;
        }
        self.hypnogram.iter().filter(|&&s| s == stage).count() as f64 / self.hypnogram.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_codes_round_trip() {
        for s in SleepStage::ALL {
            assert_eq!(SleepStage::try_from(u8::from(s)).unwrap(), s);
        }
        assert!(SleepStage::try_from(5).is_err());
    }

    #[test]
    fn outcome_order_is_fixed() {
        assert_eq!(OutcomeId::ALL.len(), OutcomeId::COUNT);
        for (i, o) in OutcomeId::ALL.iter().enumerate() {
            assert_eq!(o.index(), i);
        }
        assert_eq!(OutcomeId::ALL.iter().filter(|o| o.is_disease()).count(), 12);
    }

    #[test]
    fn apnea_threshold_is_inclusive() {
        let mut l = LabelSet {
            hypnogram: alloc::vec![],
            ahi: 15.0,
            age_years: 50.0,
            survival: alloc::vec![],
        };
        assert!(l.apnea());
        l.ahi = 14.99;
        assert!(!l.apnea());
        assert_eq!(l.age_norm(), 0.5);
    }
}

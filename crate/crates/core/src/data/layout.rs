use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SAMPLE_RATE_HZ};

/// Signal group a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "BAS")]
    Bas,
    #[serde(rename = "RESP")]
    Resp,
    #[serde(rename = "EKG")]
    Ekg,
    #[serde(rename = "EMG")]
    Emg,
}

impl Modality {
    /// Canonical order, also the concatenation order of embeddings.
    pub const ALL: [Modality; 4] = [Modality::Bas, Modality::Resp, Modality::Ekg, Modality::Emg];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Bas => "BAS",
            Modality::Resp => "RESP",
            Modality::Ekg => "EKG",
            Modality::Emg => "EMG",
        }
    }

    /// Channel count in the canonical layout.
    pub fn canonical_channels(self) -> usize {
        match self {
            Modality::Bas => 8,
            Modality::Resp => 5,
            Modality::Ekg => 1,
            Modality::Emg => 2,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub modality: Modality,
}

/// Canonical channel names, grouped by modality in canonical order.
pub const CANONICAL_CHANNELS: [(&str, Modality); 16] = [
    ("C3-M2", Modality::Bas),
    ("C4-M1", Modality::Bas),
    ("O1-M2", Modality::Bas),
    ("O2-M1", Modality::Bas),
    ("E1-M2", Modality::Bas),
    ("E2-M1", Modality::Bas),
    ("FP1-M2", Modality::Bas),
    ("FP2-M1", Modality::Bas),
    ("CHEST", Modality::Resp),
    ("SPO2", Modality::Resp),
    ("ABD", Modality::Resp),
    ("NASAL", Modality::Resp),
    ("ORAL", Modality::Resp),
    ("EKG_L-EKG_R", Modality::Ekg),
    ("CHIN", Modality::Emg),
    ("LEG", Modality::Emg),
];

/// Channels kept by the time-domain baseline, one per modality.
pub const REPRESENTATIVE_CHANNELS: [&str; 4] = ["C3-M2", "NASAL", "EKG_L-EKG_R", "LEG"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub channels: Vec<Channel>,
    pub sample_rate_hz: u32,
}

impl ChannelLayout {
    /// The 16-channel layout at 128 Hz.
    pub fn canonical() -> Self {
        Self {
            channels: CANONICAL_CHANNELS
                .iter()
                .map(|&(name, modality)| Channel {
                    name: name.to_string(),
                    modality,
                })
                .collect(),
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    /// Channel indices of one modality, in layout order.
    pub fn channels_of(&self, modality: Modality) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.modality == modality)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks names are unique and the per-modality counts are canonical.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::config("sample_rate_hz", "must be positive"));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::config(
                    "channels",
                    alloc::format!("duplicate channel {}", c.name),
                ));
            }
        }
        for m in Modality::ALL {
            let n = self.channels_of(m).len();
            if n != m.canonical_channels() {
                return Err(Error::config(
                    "channels",
                    alloc::format!("{m} has {n} channels, expected {}", m.canonical_channels()),
                ));
            }
        }
        Ok(())
    }

    /// Indices of the four representative channels.
    pub fn representative(&self) -> Result<[usize; 4]> {
        let mut out = [0; 4];
        for (slot, name) in out.iter_mut().zip(REPRESENTATIVE_CHANNELS) {
            *slot = self.index_of(name).ok_or_else(|| {
                Error::InvalidInput(alloc::format!("missing representative channel {name}"))
            })?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_layout_counts() {
        let l = ChannelLayout::canonical();
        assert_eq!(l.len(), 16);
        assert_eq!(l.channels_of(Modality::Bas).len(), 8);
        assert_eq!(l.channels_of(Modality::Resp), alloc::vec![8, 9, 10, 11, 12]);
        assert_eq!(l.channels_of(Modality::Ekg), alloc::vec![13]);
        assert_eq!(l.channels_of(Modality::Emg), alloc::vec![14, 15]);
        assert!(l.validate().is_ok());
        assert_eq!(l.representative().unwrap(), [0, 11, 13, 15]);
    }

    #[test]
    fn rejects_duplicates_and_missing_channels() {
        let mut l = ChannelLayout::canonical();
        l.channels[1].name = "C3-M2".into();
        assert!(l.validate().is_err());
        let mut l = ChannelLayout::canonical();
        l.channels.pop();
        assert!(l.validate().is_err());
        assert!(l.representative().is_err());
    }
}

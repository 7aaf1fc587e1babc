use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::labels::{LabelSet, OutcomeId};
use super::layout::ChannelLayout;
use crate::{Result, PATCH_LEN};

/// Identity and labels of a record, everything except the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub record_id: String,
    pub subject_id: String,
    pub n_samples: usize,
    pub labels: LabelSet,
}

/// One overnight recording: channel-major samples plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PsgRecord {
    pub meta: RecordMeta,
    pub layout: ChannelLayout,
    /// `[channels × n_samples]`, channel-major.
    pub signal: Vec<f32>,
}

impl PsgRecord {
    pub fn n_channels(&self) -> usize {
        self.layout.len()
    }

    pub fn n_samples(&self) -> usize {
        self.meta.n_samples
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.meta.n_samples;
        &self.signal[c * n..(c + 1) * n]
    }

    pub fn duration_s(&self) -> f64 {
        self.meta.n_samples as f64 / self.layout.sample_rate_hz as f64
    }
}

/// Random access to the records of a cohort, in manifest order.
pub trait RecordSource {
    fn layout(&self) -> &ChannelLayout;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn meta(&self, index: usize) -> &RecordMeta;

    /// Samples `start..start + len` of every channel, channel-major.
    fn read_window(&self, index: usize, start: usize, len: usize) -> Result<Vec<f32>>;

    fn load(&self, index: usize) -> Result<PsgRecord> {
        let meta = self.meta(index).clone();
        let signal = self.read_window(index, 0, meta.n_samples)?;
        Ok(PsgRecord {
            meta,
            layout: self.layout().clone(),
            signal,
        })
    }
}

/// In-memory records.
pub struct MemorySource {
    layout: ChannelLayout,
    records: Vec<PsgRecord>,
}

impl MemorySource {
    pub fn new(layout: ChannelLayout, records: Vec<PsgRecord>) -> Self {
        Self { layout, records }
    }

    pub fn records(&self) -> &[PsgRecord] {
        &self.records
    }
}

impl RecordSource for MemorySource {
    fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    fn len(&self) -> usize {
        self.records.len()
    }

    fn meta(&self, index: usize) -> &RecordMeta {
        &self.records[index].meta
    }

    fn read_window(&self, index: usize, start: usize, len: usize) -> Result<Vec<f32>> {
        let r = &self.records[index];
        if start + len > r.n_samples() {
            return Err(crate::Error::Source(alloc::format!(
                "window {start}+{len} beyond {} samples of {}",
                r.n_samples(),
                r.meta.record_id
            )));
        }
        let mut out = Vec::with_capacity(len * r.n_channels());
        for c in 0..r.n_channels() {
            out.extend_from_slice(&r.channel(c)[start..start + len]);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    ChannelCount {
        expected: usize,
        actual: usize,
    },
    ChannelName {
        index: usize,
        expected: String,
        actual: String,
    },
    SampleRate {
        expected: u32,
        actual: u32,
    },
    SignalLength {
        expected: usize,
        actual: usize,
    },
    NonFinite {
        channel: usize,
        sample: usize,
    },
    HypnogramLength {
        expected: usize,
        actual: usize,
    },
    NegativeAhi(f64),
    AgeOutOfRange(f64),
    SurvivalOutcomes {
        expected: usize,
        actual: usize,
    },
    SurvivalOrder {
        index: usize,
    },
    NonPositiveTime {
        index: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks a record against a layout and the label invariants. Never fails;
/// problems are reported as findings.
pub fn validate_record(record: &PsgRecord, layout: &ChannelLayout) -> ValidationReport {
    let mut findings = Vec::new();
    if record.layout.len() != layout.len() {
        findings.push(Finding::ChannelCount {
            expected: layout.len(),
            actual: record.layout.len(),
        });
    }
    for (i, (a, e)) in record
        .layout
        .channels
        .iter()
        .zip(&layout.channels)
        .enumerate()
    {
        if a.name != e.name || a.modality != e.modality {
            findings.push(Finding::ChannelName {
                index: i,
                expected: e.name.clone(),
                actual: a.name.clone(),
            });
        }
    }
    if record.layout.sample_rate_hz != layout.sample_rate_hz {
        findings.push(Finding::SampleRate {
            expected: layout.sample_rate_hz,
            actual: record.layout.sample_rate_hz,
        });
    }
    let n = record.meta.n_samples;
    let expected_len = n * record.layout.len();
    if record.signal.len() != expected_len {
        findings.push(Finding::SignalLength {
            expected: expected_len,
            actual: record.signal.len(),
        });
    } else if let Some(pos) = record.signal.iter().position(|v| !v.is_finite()) {
        findings.push(Finding::NonFinite {
            channel: pos / n.max(1),
            sample: pos % n.max(1),
        });
    }
    let labels = &record.meta.labels;
    let patches = n / PATCH_LEN;
    if labels.hypnogram.len() != patches {
        findings.push(Finding::HypnogramLength {
            expected: patches,
            actual: labels.hypnogram.len(),
        });
    }
    if !(labels.ahi >= 0.0) {
        findings.push(Finding::NegativeAhi(labels.ahi));
    }
    if !(0.0..=100.0).contains(&labels.age_years) {
        findings.push(Finding::AgeOutOfRange(labels.age_years));
    }
    if labels.survival.len() != OutcomeId::COUNT {
        findings.push(Finding::SurvivalOutcomes {
            expected: OutcomeId::COUNT,
            actual: labels.survival.len(),
        });
    }
    for (i, o) in labels.survival.iter().enumerate() {
        if OutcomeId::ALL.get(i) != Some(&o.outcome_id) {
            findings.push(Finding::SurvivalOrder { index: i });
        }
        if !(o.time_days > 0.0) {
            findings.push(Finding::NonPositiveTime { index: i });
        }
    }
    ValidationReport { findings }
}

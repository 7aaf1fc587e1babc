//! Tensorization of records into 300 s segments of 5 s patches.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{PsgRecord, RecordSource};
use crate::{Error, Result, MAX_RECORD_PATCHES, PATCH_LEN, SAMPLE_RATE_HZ, SEGMENT_PATCHES};

/// Samples per channel in one segment.
pub const SEGMENT_LEN: usize = SEGMENT_PATCHES * PATCH_LEN;

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentWarning {
    /// The record holds less than one segment and yields nothing.
    TooShort { record_id: String, seconds: f64 },
    /// A trailing partial segment was dropped.
    TrailingDropped { record_id: String, seconds: f64 },
}

/// Segments stacked as `[batch × channels × 60 patches × 640 samples]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentBatch {
    pub n_channels: usize,
    pub data: Vec<f32>,
    pub record_ids: Vec<String>,
    /// Segment start offsets in seconds from record start.
    pub start_s: Vec<usize>,
    pub warnings: Vec<SegmentWarning>,
}

impl SegmentBatch {
    pub fn new(n_channels: usize) -> Self {
        Self {
            n_channels,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.record_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_ids.is_empty()
    }

    pub fn segment_size(&self) -> usize {
        self.n_channels * SEGMENT_LEN
    }

    /// Channel-major samples of one segment, `[channels × 38400]`.
    pub fn segment(&self, i: usize) -> &[f32] {
        let s = self.segment_size();
        &self.data[i * s..(i + 1) * s]
    }

    /// One 640-sample patch.
    pub fn patch(&self, segment: usize, channel: usize, patch: usize) -> &[f32] {
        let off = channel * SEGMENT_LEN + patch * PATCH_LEN;
        &self.segment(segment)[off..off + PATCH_LEN]
    }

    pub fn push(&mut self, record_id: &str, start_s: usize, samples: &[f32]) -> Result<()> {
        if samples.len() != self.segment_size() {
            return Err(Error::shape("segment", self.segment_size(), samples.len()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: "segment samples",
            });
        }
        self.data.extend_from_slice(samples);
        self.record_ids.push(record_id.into());
        self.start_s.push(start_s);
        Ok(())
    }
}

/// Number of whole segments in a record of `n_samples`.
pub fn segment_count(n_samples: usize) -> usize {
    n_samples / SEGMENT_LEN
}

fn segment_warnings(record_id: &str, n_samples: usize) -> Option<SegmentWarning> {
    let rate = SAMPLE_RATE_HZ as f64;
    let rest = n_samples % SEGMENT_LEN;
    if n_samples < SEGMENT_LEN {
        Some(SegmentWarning::TooShort {
            record_id: record_id.into(),
            seconds: n_samples as f64 / rate,
        })
    } else if rest > 0 {
        Some(SegmentWarning::TrailingDropped {
            record_id: record_id.into(),
            seconds: rest as f64 / rate,
        })
    } else {
        None
    }
}

/// Non-overlapping segments from the start of the record; a trailing
/// remainder shorter than a segment is dropped with a warning.
pub fn segment_record(record: &PsgRecord) -> Result<SegmentBatch> {
    let n = record.n_samples();
    let c = record.n_channels();
    if record.signal.len() != n * c {
        return Err(Error::shape("record signal", n * c, record.signal.len()));
    }
    let mut batch = SegmentBatch::new(c);
    batch
        .warnings
        .extend(segment_warnings(&record.meta.record_id, n));
    let mut buf = Vec::with_capacity(c * SEGMENT_LEN);
    for s in 0..segment_count(n) {
        buf.clear();
        for ch in 0..c {
            let start = s * SEGMENT_LEN;
            buf.extend_from_slice(&record.channel(ch)[start..start + SEGMENT_LEN]);
        }
        batch.push(
            &record.meta.record_id,
            s * SEGMENT_LEN / SAMPLE_RATE_HZ as usize,
            &buf,
        )?;
    }
    Ok(batch)
}

/// Reads one segment of a record without loading the whole night.
pub fn read_segment<S: RecordSource + ?Sized>(
    source: &S,
    record: usize,
    segment: usize,
) -> Result<Vec<f32>> {
    source.read_window(record, segment * SEGMENT_LEN, SEGMENT_LEN)
}

/// Validity of the fixed 8 h fine-tuning context for a record with
/// `n_patches` patches: the first `min(n_patches, 5760)` positions are valid,
/// the rest is padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    pub valid: Vec<bool>,
}

impl ValidityMask {
    pub fn for_patches(n_patches: usize) -> Self {
        let used = n_patches.min(MAX_RECORD_PATCHES);
        let mut valid = alloc::vec![false; MAX_RECORD_PATCHES];
        valid[..used].iter_mut().for_each(|v| *v = true);
        Self { valid }
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Per-channel z-normalization of a channel-major buffer. Off by default in
/// every pipeline; constant channels are centred but not scaled.
pub fn z_normalize(samples: &mut [f32], n_channels: usize) {
    let len = samples.len() / n_channels.max(1);
    for ch in samples.chunks_mut(len.max(1)) {
        let mean = ch.iter().map(|v| *v as f64).sum::<f64>() / len as f64;
        let var = ch
            .iter()
            .map(|v| {
                let d = *v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / len as f64;
        let sd = libm::sqrt(var);
        let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
        for v in ch.iter_mut() {
            *v = ((*v as f64 - mean) * scale) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ChannelLayout, LabelSet, RecordMeta};

    fn record(seconds: usize) -> PsgRecord {
        let layout = ChannelLayout::canonical();
        let n = seconds * SAMPLE_RATE_HZ as usize;
        let signal = (0..n * layout.len())
            .map(|i| (i % 9973) as f32 * 1e-3)
            .collect();
        PsgRecord {
            meta: RecordMeta {
                record_id: "r".into(),
                subject_id: "s".into(),
                n_samples: n,
                labels: LabelSet::default(),
            },
            layout,
            signal,
        }
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment_count(8 * 3600 * 128), 96);
        let b = segment_record(&record(299)).unwrap();
        assert!(b.is_empty());
        assert!(matches!(b.warnings[..], [SegmentWarning::TooShort { .. }]));
        let b = segment_record(&record(301)).unwrap();
        assert_eq!(b.len(), 1);
        match &b.warnings[..] {
            [SegmentWarning::TrailingDropped { seconds, .. }] => assert_eq!(*seconds, 1.0),
            other => panic!("{other:?}"),
        }
        assert!(segment_record(&record(600)).unwrap().warnings.is_empty());
    }

    #[test]
    fn segments_reassemble_the_prefix() {
        let r = record(700);
        let b = segment_record(&r).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.start_s, [0, 300]);
        for ch in 0..r.n_channels() {
            let mut joined = Vec::new();
            for s in 0..b.len() {
                for p in 0..SEGMENT_PATCHES {
                    joined.extend_from_slice(b.patch(s, ch, p));
                }
            }
            assert_eq!(joined[..], r.channel(ch)[..2 * SEGMENT_LEN]);
        }
    }

    #[test]
    fn validity_mask() {
        assert_eq!(ValidityMask::for_patches(100).n_valid(), 100);
        assert_eq!(
            ValidityMask::for_patches(9000).n_valid(),
            MAX_RECORD_PATCHES
        );
        assert_eq!(ValidityMask::for_patches(0).valid.len(), MAX_RECORD_PATCHES);
    }

    #[test]
    fn z_normalization() {
        let mut x = [1.0f32, 2.0, 3.0, 5.0, 5.0, 5.0];
        z_normalize(&mut x, 2);
        assert!((x[0] + x[2]).abs() < 1e-6 && x[1].abs() < 1e-6);
        assert_eq!(&x[3..], &[0.0, 0.0, 0.0]);
    }
}

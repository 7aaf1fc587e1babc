//! Resampling, zero-phase filtering and segmentation.

pub mod filter;
pub mod resample;
pub mod segment;

pub use filter::{design_lowpass, filtfilt, FilterSpec, Section};
pub use resample::{resample, Rate};
pub use segment::{
    read_segment, segment_count, segment_record, z_normalize, SegmentBatch, SegmentWarning,
    ValidityMask, SEGMENT_LEN,
};

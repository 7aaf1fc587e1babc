//! Records, labels, channel layout, manifests and the synthetic cohort.

pub mod labels;
pub mod layout;
pub mod manifest;
pub mod record;
pub mod synthetic;

pub use labels::{LabelSet, OutcomeId, SleepStage, SurvivalOutcome, APNEA_AHI_THRESHOLD};
pub use layout::{Channel, ChannelLayout, Modality, CANONICAL_CHANNELS, REPRESENTATIVE_CHANNELS};
pub use manifest::{
    assign_splits, sample_fewshot_subsets, FewshotSubset, ManifestEntry, RecordManifest, Split,
    SplitRatios, DEFAULT_FEWSHOT_REPLICATES, DEFAULT_FEWSHOT_SIZES,
};
pub use record::{
    validate_record, Finding, MemorySource, PsgRecord, RecordMeta, RecordSource, ValidationReport,
};
pub use synthetic::{generate_synthetic_cohort, record_ids, SyntheticCohort, SyntheticConfig};

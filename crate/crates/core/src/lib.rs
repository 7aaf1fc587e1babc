//! Core algorithms for a desk-scale polysomnography (PSG) self-supervised
//! representation learning benchmark.
//!
//! The crate is `no_std` (with `alloc`). Everything that touches files, the
//! command line or wall-clock time lives in the companion `psgbench` crate.
//! The default `std` feature only swaps in faster backends (FFT, runtime CPU
//! feature detection for GEMM).
//!
//! Module map:
//!
//! - [`data`]: channel layout, labels, records, manifests, splits and the
//!   synthetic cohort generator.
//! - [`preprocess`]: Butterworth design, zero-phase filtering, resampling and
//!   segmentation into 300 s windows of 5 s patches.
//! - [`spectral`]: real DFT, amplitude transform and the two baseline
//!   embeddings.
//! - [`autograd`]: a small reverse-mode tape over row-major matrices.
//! - [`backbone`]: per-modality CNN patch encoders and temporal transformers.
//! - [`pretrain`]: the eight self-supervised objectives and their trainer.
//! - [`finetune`]: frozen-backbone task heads, task losses and trainer.
//! - [`eval`]: metrics, bootstrap intervals and evaluation protocols.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod autograd;
pub mod backbone;
pub mod data;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod nn;
pub mod optim;
pub mod preprocess;
pub mod pretrain;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Samples per second after resampling.
pub const SAMPLE_RATE_HZ: u32 = 128;
/// Samples per 5 s patch.
pub const PATCH_LEN: usize = 640;
/// Patches per 300 s segment.
pub const SEGMENT_PATCHES: usize = 60;
/// Seconds per patch.
pub const PATCH_SECONDS: usize = 5;
/// Seconds per segment.
pub const SEGMENT_SECONDS: usize = 300;
/// Fine-tuning context: 8 h of patches.
pub const MAX_RECORD_PATCHES: usize = 5760;

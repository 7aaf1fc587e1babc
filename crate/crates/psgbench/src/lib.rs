//! File formats, on-disk cohorts and the `psgbench` command line.

pub mod checkpoint;
pub mod cli;
pub mod disk;
pub mod error;
pub mod report;

pub use error::{Error, Result};

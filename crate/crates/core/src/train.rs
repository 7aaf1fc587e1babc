//! Bookkeeping shared by the pretraining and fine-tuning loops.

use serde::{Deserialize, Serialize};

use crate::data::Split;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum TrainStatus {
    Completed,
    EarlyStopped { epoch: usize },
    /// A non-finite loss or gradient appeared at `step`; the parameters are
    /// the last finite ones.
    Diverged { step: usize },
}

//! Frozen-backbone fine-tuning: task heads, task losses, embedding
//! precomputation and the training loop.

mod embed;
mod head;
mod losses;
mod trainer;

pub use embed::{embed_records, EmbeddingMethod, EmbeddingTable};
pub use head::{FeatureScaler, HeadConfig, TaskHead};
pub use losses::{
    age_prediction, loss_age, loss_binary, loss_ce, loss_coxph, loss_survival_total, sigmoid, softplus,
    CoxLoss, SurvivalLoss,
};
pub use trainer::{finetune, task_loss, FinetuneConfig, FinetuneOutcome, RecordPrediction};

use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::data::OutcomeId;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Staging,
    Apnea,
    Age,
    Survival,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Staging, Task::Apnea, Task::Age, Task::Survival];

    pub fn name(self) -> &'static str {
        match self {
            Task::Staging => "staging",
            Task::Apnea => "apnea",
            Task::Age => "age",
            Task::Survival => "survival",
        }
    }

    /// Output columns: 5 stage logits per patch, or per record one apnea
    /// logit, one raw age value, or 13 hazards.
    pub fn output_width(self) -> usize {
        match self {
            Task::Staging => 5,
            Task::Apnea | Task::Age => 1,
            Task::Survival => OutcomeId::COUNT,
        }
    }

    pub fn per_patch(self) -> bool {
        self == Task::Staging
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown task `{s}`")))
    }
}

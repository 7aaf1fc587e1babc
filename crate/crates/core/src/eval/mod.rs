//! Metrics with bootstrap intervals, report rows and the few-shot and
//! compute-controlled protocols.

mod bootstrap;
mod metrics;
mod protocol;
mod report;

pub use bootstrap::{bootstrap_ci, BootstrapConfig, MAX_RETRIES};
pub use metrics::{auroc, auroc_multiclass, c_index, mae_years, MacroAuroc};
pub use protocol::{
    finetune_and_evaluate, run_compute_controlled, run_fewshot, summarize_fewshot, ComputeConfig, FewshotConfig, Method,
    COMPUTE_EPOCHS, COMPUTE_SUBJECTS,
};
pub use report::{evaluate_task, higher_is_better, primary_metric, MetricReport, MetricValue, Protocol};

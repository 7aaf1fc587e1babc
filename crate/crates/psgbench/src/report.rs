//! CSV and JSON emission for loss curves, predictions and metric rows.

use std::path::Path;

use psgbench_core::data::{OutcomeId, SleepStage};
use psgbench_core::eval::MetricReport;
use psgbench_core::finetune::{RecordPrediction, Task};
use psgbench_core::train::LossPoint;

use crate::error::{csv, Result};

fn writer(path: &Path) -> Result<::csv::Writer<std::fs::File>> {
    ::csv::Writer::from_path(path).map_err(csv(path))
}

/// Columns `step,epoch,loss,split`.
pub fn write_loss_csv(path: &Path, curve: &[LossPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "epoch", "loss", "split"]).map_err(csv(path))?;
    for p in curve {
        w.write_record([p.step.to_string(), p.epoch.to_string(), p.loss.to_string(), p.split.to_string()])
            .map_err(csv(path))?;
    }
    w.flush().map_err(|e| crate::error::io(path)(e))
}

/// One row per metric in the flat report schema.
pub fn write_reports_csv(path: &Path, rows: &[MetricReport]) -> Result<()> {
    let mut w = ::csv::WriterBuilder::new().has_headers(true).from_path(path).map_err(csv(path))?;
    if rows.is_empty() {
        w.write_record([
            "task", "method", "metric", "value", "ci_low", "ci_high", "n_records", "protocol", "subset_size", "replicate",
            "pretrain_epochs", "seed",
        ])
        .map_err(csv(path))?;
    }
    for r in rows {
        w.serialize(r).map_err(csv(path))?;
    }
    w.flush().map_err(|e| crate::error::io(path)(e))
}

/// Staging: one row per patch with five stage probabilities. Apnea: the
/// probability. Age: years. Survival: the 13 hazards.
pub fn write_predictions_csv(path: &Path, task: Task, predictions: &[RecordPrediction], record_ids: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["record_id".to_string(), "task".to_string()];
    match task {
        Task::Staging => {
            header.push("patch".into());
            header.extend(SleepStage::ALL.iter().map(|s| s.name().to_string()));
        }
        Task::Apnea => header.push("apnea_probability".into()),
        Task::Age => header.push("age_years".into()),
        Task::Survival => header.extend(OutcomeId::ALL.iter().map(|o| o.name().to_string())),
    }
    w.write_record(&header).map_err(csv(path))?;
    for p in predictions {
        let id = &record_ids[p.record];
        for r in 0..p.output.rows() {
            let mut row = vec![id.clone(), task.name().to_string()];
            if task == Task::Staging {
                row.push(r.to_string());
            }
            row.extend(p.output.row(r).iter().map(f64::to_string));
            w.write_record(&row).map_err(csv(path))?;
        }
    }
    w.flush().map_err(|e| crate::error::io(path)(e))
}

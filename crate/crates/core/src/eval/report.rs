use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapConfig};
use super::metrics::{auroc, auroc_multiclass, c_index, mae_years};
use crate::data::{LabelSet, OutcomeId, SleepStage};
use crate::finetune::{RecordPrediction, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Full,
    Fewshot,
    Compute,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Full => "full",
            Protocol::Fewshot => "fewshot",
            Protocol::Compute => "compute",
        })
    }
}

/// One metric of one method on one task, with its bootstrap interval.
/// `value` is `None` when the metric is undefined on the test records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub method: String,
    pub metric: String,
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_records: usize,
    pub protocol: Protocol,
    pub subset_size: Option<usize>,
    pub replicate: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub seed: u64,
}

/// A computed metric before protocol metadata is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub metric: String,
    pub value: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

impl MetricValue {
    pub fn report(&self, task: Task, method: &str, n_records: usize, protocol: Protocol, seed: u64) -> MetricReport {
        MetricReport {
            task,
            method: method.to_string(),
            metric: self.metric.clone(),
            value: self.value,
            ci_low: self.ci.map(|c| c.0),
            ci_high: self.ci.map(|c| c.1),
            n_records,
            protocol,
            subset_size: None,
            replicate: None,
            pretrain_epochs: None,
            seed,
        }
    }
}

/// Name of the metric each protocol summary uses.
pub fn primary_metric(task: Task) -> &'static str {
    match task {
        Task::Staging => "auroc_macro",
        Task::Apnea => "auroc",
        Task::Age => "mae_years",
        Task::Survival => "c_index_mean",
    }
}

/// Lower is better only for age.
pub fn higher_is_better(task: Task) -> bool {
    task != Task::Age
}

fn undefined(e: Error) -> Result<Option<f64>> {
    match e {
        Error::UndefinedMetric(_) => Ok(None),
        e => Err(e),
    }
}

/// Point estimate plus a percentile interval over record resamples. The
/// interval is widened to contain the point estimate if needed.
fn with_ci(
    name: String,
    n: usize,
    boot: BootstrapConfig,
    metric: impl Fn(&[usize]) -> Result<f64>,
) -> Result<MetricValue> {
    let all: Vec<usize> = (0..n).collect();
    let value = metric(&all).map(Some).or_else(undefined)?;
    let ci = match value {
        None => None,
        Some(v) => match bootstrap_ci(n, boot, &metric) {
            Ok((lo, hi)) => Some((lo.min(v), hi.max(v))),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        },
    };
    Ok(MetricValue { metric: name, value, ci })
}

/// Every metric of a task on test predictions; `labels[i]` belongs to
/// `predictions[i]`. Records are the resampling unit.
///
/// Staging yields the macro AUROC and one AUROC per stage; survival yields
/// one C-index per outcome and their mean.
pub fn evaluate_task(
    task: Task,
    predictions: &[RecordPrediction],
    labels: &[&LabelSet],
    boot: BootstrapConfig,
) -> Result<Vec<MetricValue>> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("prediction labels", predictions.len(), labels.len()));
    }
    let n = predictions.len();
    let scalar = |i: usize| predictions[i].output.get(0, 0);
    match task {
        Task::Staging => {
            let mut ys = Vec::with_capacity(n);
            for (p, l) in predictions.iter().zip(labels) {
                let t = p.output.rows();
                if p.output.cols() != 5 || l.hypnogram.len() < t {
                    return Err(Error::shape("staging prediction", l.hypnogram.len(), t));
                }
                ys.push(l.hypnogram[..t].iter().map(|s| s.index()).collect::<Vec<_>>());
            }
            let pooled = |idx: &[usize]| {
                let mut s = Vec::new();
                let mut y = Vec::new();
                for &i in idx {
                    s.extend_from_slice(predictions[i].output.data());
                    y.extend_from_slice(&ys[i]);
                }
                (s, y)
            };
            let mut out = Vec::with_capacity(6);
            out.push(with_ci("auroc_macro".into(), n, boot, |idx| {
                let (s, y) = pooled(idx);
                Ok(auroc_multiclass(&s, &y, 5)?.macro_avg)
            })?);
            for stage in SleepStage::ALL {
                let c = stage.index();
                out.push(with_ci(format!("auroc_{}", stage.name()), n, boot, |idx| {
                    let (s, y) = pooled(idx);
                    let col: Vec<f64> = s.iter().skip(c).step_by(5).copied().collect();
                    let pos: Vec<bool> = y.iter().map(|&v| v == c).collect();
                    auroc(&col, &pos)
                })?);
            }
            Ok(out)
        }
        Task::Apnea => Ok(alloc::vec![with_ci("auroc".into(), n, boot, |idx| {
            let s: Vec<f64> = idx.iter().map(|&i| scalar(i)).collect();
            let y: Vec<bool> = idx.iter().map(|&i| labels[i].apnea()).collect();
            auroc(&s, &y)
        })?]),
        Task::Age => Ok(alloc::vec![with_ci("mae_years".into(), n, boot, |idx| {
            let p: Vec<f64> = idx.iter().map(|&i| scalar(i)).collect();
            let y: Vec<f64> = idx.iter().map(|&i| labels[i].age_years).collect();
            mae_years(&p, &y)
        })?]),
        Task::Survival => {
            for p in predictions {
                if p.output.cols() != OutcomeId::COUNT {
                    return Err(Error::shape("hazards", OutcomeId::COUNT, p.output.cols()));
                }
            }
            let outcome = |k: usize, idx: &[usize]| -> Result<f64> {
                let id = OutcomeId::ALL[k];
                let mut h = Vec::with_capacity(idx.len());
                let mut e = Vec::with_capacity(idx.len());
                let mut t = Vec::with_capacity(idx.len());
                for &i in idx {
                    let o = labels[i]
                        .outcome(id)
                        .ok_or_else(|| Error::InvalidInput(format!("record lacks outcome {}", id.name())))?;
                    h.push(predictions[i].output.get(0, k));
                    e.push(o.event);
                    t.push(o.time_days);
                }
                c_index(&h, &e, &t)
            };
            let mut out = Vec::with_capacity(OutcomeId::COUNT + 1);
            for (k, id) in OutcomeId::ALL.iter().enumerate() {
                out.push(with_ci(format!("c_index_{}", id.name()), n, boot, |idx| outcome(k, idx))?);
            }
            out.push(with_ci("c_index_mean".into(), n, boot, |idx| {
                let mut sum = 0.0;
                let mut defined = 0;
                for k in 0..OutcomeId::COUNT {
                    if let Some(v) = outcome(k, idx).map(Some).or_else(undefined)? {
                        sum += v;
                        defined += 1;
                    }
                }
                if defined == 0 {
                    return Err(Error::UndefinedMetric("no outcome has comparable pairs"));
                }
                Ok(sum / defined as f64)
            })?);
            Ok(out)
        }
    }
}

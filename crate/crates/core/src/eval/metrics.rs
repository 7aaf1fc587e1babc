use alloc::vec::Vec;

use crate::{Error, Result};

/// Midranks (1-based) of `values`, ties sharing their average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// `P(score_pos > score_neg) + ½ P(equal)` via the rank-sum statistic.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auroc labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { term: "auroc scores" });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("auroc needs both classes"));
    }
    let ranks = midranks(scores);
    let sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One-vs-rest AUROC per class and their mean over classes with both
/// positives and negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroAuroc {
    pub macro_avg: f64,
    /// `None` for classes absent from (or covering all of) the labels.
    pub per_class: Vec<Option<f64>>,
}

/// `scores` is row-major `[n × classes]`.
pub fn auroc_multiclass(scores: &[f64], labels: &[usize], classes: usize) -> Result<MacroAuroc> {
    if scores.len() != labels.len() * classes {
        return Err(Error::shape("class scores", labels.len() * classes, scores.len()));
    }
    let mut per_class = Vec::with_capacity(classes);
    let mut column = Vec::with_capacity(labels.len());
    for c in 0..classes {
        column.clear();
        column.extend((0..labels.len()).map(|i| scores[i * classes + c]));
        let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        per_class.push(match auroc(&column, &y) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        });
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::UndefinedMetric("macro auroc needs two classes present"));
    }
    Ok(MacroAuroc {
        macro_avg: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
    })
}

/// Mean absolute error.
pub fn mae_years(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape("mae targets", pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(Error::UndefinedMetric("mae of nothing"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Harrell's concordance: pairs with `t_i < t_j` and an event at `i` are
/// comparable; `h_i > h_j` is concordant and hazard ties count ½.
pub fn c_index(hazards: &[f64], events: &[bool], times: &[f64]) -> Result<f64> {
    let n = hazards.len();
    if events.len() != n || times.len() != n {
        return Err(Error::shape("c-index inputs", n, events.len().min(times.len())));
    }
    let (mut num, mut comparable) = (0.0, 0u64);
    for i in (0..n).filter(|&i| events[i]) {
        for j in 0..n {
            if times[i] < times[j] {
                comparable += 1;
                if hazards[i] > hazards[j] {
                    num += 1.0;
                } else if hazards[i] == hazards[j] {
                    num += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedMetric("c-index without comparable pairs"));
    }
    Ok(num / comparable as f64)
}

//! Task losses with analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{OutcomeId, SurvivalOutcome};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Mean cross-entropy of `logits` (`[n × k]`) over rows where `mask` is
/// true (all rows when `None`).
pub fn loss_ce(logits: &Tensor, labels: &[usize], mask: Option<&[bool]>) -> Result<(f64, Tensor)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(Error::shape("labels", n, labels.len()));
    }
    if mask.is_some_and(|m| m.len() != n) {
        return Err(Error::shape("label mask", n, mask.map_or(0, <[bool]>::len)));
    }
    let mut grad = Tensor::zeros(n, k);
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..n {
        if mask.is_some_and(|m| !m[r]) {
            continue;
        }
        let y = labels[r];
        if y >= k {
            return Err(Error::InvalidInput(alloc::format!("label {y} outside {k} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = row.iter().map(|&v| libm::exp(v - max)).sum();
        total += max + libm::log(z) - row[y];
        for (g, &v) in grad.row_mut(r).iter_mut().zip(row) {
            *g = libm::exp(v - max) / z;
        }
        grad.row_mut(r)[y] -= 1.0;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    grad.scale(1.0 / count as f64);
    Ok((total / count as f64, grad))
}

/// Binary cross-entropy on single logits (equivalent to two-class
/// cross-entropy with logits `(0, z)`).
pub fn loss_binary(logits: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::shape("binary labels", logits.len(), labels.len()));
    }
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            total += if y { softplus(-z) } else { softplus(z) };
            (sigmoid(z) - f64::from(u8::from(y))) / n
        })
        .collect();
    Ok((total / n, grad))
}

/// `softplus(raw)`, the normalized age prediction.
pub fn age_prediction(raw: f64) -> f64 {
    softplus(raw)
}

/// Mean of `(softplus(raw) − age/100)²` and its gradient in `raw`.
pub fn loss_age(raw: &[f64], age_years: &[f64]) -> Result<(f64, Vec<f64>)> {
    if raw.len() != age_years.len() {
        return Err(Error::shape("ages", raw.len(), age_years.len()));
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if let Some(a) = age_years.iter().find(|a| !(0.0..=100.0).contains(*a)) {
        return Err(Error::InvalidInput(alloc::format!("age {a} outside [0, 100]")));
    }
    let n = raw.len() as f64;
    let mut total = 0.0;
    let grad = raw
        .iter()
        .zip(age_years)
        .map(|(&r, &a)| {
            let d = softplus(r) - a / 100.0;
            total += d * d;
            2.0 * d * sigmoid(r) / n
        })
        .collect();
    Ok((total / n, grad))
}

/// Cox partial-likelihood loss for one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// No events in the batch: the loss is 0 by convention.
    pub no_events: bool,
}

/// `−(1/N_e) Σ_i δ_i (h_i − log Σ_{j: t_j ≥ t_i} exp h_j)`.
pub fn loss_coxph(hazards: &[f64], events: &[bool], times: &[f64]) -> Result<CoxLoss> {
    let n = hazards.len();
    if events.len() != n || times.len() != n {
        return Err(Error::shape("survival batch", n, events.len().min(times.len())));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if hazards.iter().any(|h| !h.is_finite()) {
        return Err(Error::NonFinite { term: "hazard" });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite { term: "survival time" });
    }
    let n_events = events.iter().filter(|e| **e).count();
    let mut grad = vec![0.0; n];
    if n_events == 0 {
        return Ok(CoxLoss { loss: 0.0, grad, no_events: true });
    }
    let ne = n_events as f64;
    let mut total = 0.0;
    for i in (0..n).filter(|&i| events[i]) {
        let risk = || (0..n).filter(|&j| times[j] >= times[i]);
        let max = risk().map(|j| hazards[j]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = risk().map(|j| libm::exp(hazards[j] - max)).sum();
        total += hazards[i] - (max + libm::log(z));
        grad[i] -= 1.0 / ne;
        for j in risk() {
            grad[j] += libm::exp(hazards[j] - max) / z / ne;
        }
    }
    Ok(CoxLoss { loss: -total / ne, grad, no_events: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalLoss {
    /// `L_disease + L_death`.
    pub loss: f64,
    pub disease: f64,
    pub death: f64,
    pub per_outcome: [f64; OutcomeId::COUNT],
    /// Outcomes without events in the batch.
    pub no_events: [bool; OutcomeId::COUNT],
    pub grad: Tensor,
}

/// Sum of the twelve per-disease Cox losses plus the death loss, with
/// hazards `[batch × 13]` in canonical outcome order.
pub fn loss_survival_total(hazards: &Tensor, labels: &[&[SurvivalOutcome]]) -> Result<SurvivalLoss> {
    let (b, k) = hazards.shape();
    if k != OutcomeId::COUNT {
        return Err(Error::shape("hazards", OutcomeId::COUNT, k));
    }
    if labels.len() != b {
        return Err(Error::shape("survival labels", b, labels.len()));
    }
    let mut grad = Tensor::zeros(b, k);
    let mut per_outcome = [0.0; OutcomeId::COUNT];
    let mut no_events = [false; OutcomeId::COUNT];
    let (mut disease, mut death) = (0.0, 0.0);
    for id in OutcomeId::ALL {
        let o = id.index();
        let mut h = Vec::with_capacity(b);
        let mut ev = Vec::with_capacity(b);
        let mut t = Vec::with_capacity(b);
        for (r, l) in labels.iter().enumerate() {
            let s = l
                .get(o)
                .filter(|s| s.outcome_id == id)
                .ok_or_else(|| Error::InvalidInput(alloc::format!("record {r} lacks outcome {}", id.name())))?;
            h.push(hazards.get(r, o));
            ev.push(s.event);
            t.push(s.time_days);
        }
        let c = loss_coxph(&h, &ev, &t)?;
        per_outcome[o] = c.loss;
        no_events[o] = c.no_events;
        if id.is_disease() {
            disease += c.loss;
        } else {
            death += c.loss;
        }
        for (r, g) in c.grad.iter().enumerate() {
            grad.set(r, o, *g);
        }
    }
    Ok(SurvivalLoss {
        loss: disease + death,
        disease,
        death,
        per_outcome,
        no_events,
        grad,
    })
}

#[cfg(test)]
mod tests;

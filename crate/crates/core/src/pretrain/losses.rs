//! Reconstruction and contrastive losses with their gradients.
//!
//! Reconstruction tensors hold one row per (segment, patch) and, per
//! channel, a block of 640 columns: raw samples in the time domain, or 320
//! transformed amplitudes followed by 320 phases in the frequency domain.
//! Inclusion masks are row-major `[rows × channels]`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::spectral::SPECTRUM_BINS;
use crate::tensor::Tensor;
use crate::{Error, Result, PATCH_LEN};

/// Default contrastive temperature.
pub const DEFAULT_TAU: f64 = 0.1;
/// Largest predicted phase magnitude accepted by the phase loss.
pub const PHASE_LIMIT: f64 = 3.0 * PI;

/// Unnormalized loss pieces, so several tensors can share one mean.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSums {
    pub sum: f64,
    pub count: usize,
    /// Gradient of `sum` with respect to the prediction.
    pub grad: Tensor,
}

/// Neumaier-compensated running sum; loss sums span tens of thousands of
/// terms.
#[derive(Default, Clone, Copy)]
struct Acc {
    sum: f64,
    carry: f64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn check_pair(pred: &Tensor, target: &Tensor, include: Option<&[bool]>) -> Result<usize> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "reconstruction",
            alloc::format!("{:?}", target.shape()),
            alloc::format!("{:?}", pred.shape()),
        ));
    }
    if pred.cols() % PATCH_LEN != 0 {
        return Err(Error::shape("reconstruction width", "a multiple of 640", pred.cols()));
    }
    let channels = pred.cols() / PATCH_LEN;
    if let Some(m) = include {
        if m.len() != pred.rows() * channels {
            return Err(Error::shape("inclusion mask", pred.rows() * channels, m.len()));
        }
    }
    Ok(channels)
}

/// Squared-error sums over included channel-patches.
pub fn time_sums(pred: &Tensor, target: &Tensor, include: Option<&[bool]>) -> Result<LossSums> {
    let channels = check_pair(pred, target, include)?;
    let mut grad = Tensor::zeros(pred.rows(), pred.cols());
    let mut sum = Acc::default();
    let mut count = 0;
    for r in 0..pred.rows() {
        for c in 0..channels {
            if include.is_some_and(|m| !m[r * channels + c]) {
                continue;
            }
            let lo = c * PATCH_LEN;
            let (p, t) = (&pred.row(r)[lo..lo + PATCH_LEN], &target.row(r)[lo..lo + PATCH_LEN]);
            let g = &mut grad.row_mut(r)[lo..lo + PATCH_LEN];
            for i in 0..PATCH_LEN {
                let d = p[i] - t[i];
                sum.add(d * d);
                g[i] = 2.0 * d;
            }
            count += PATCH_LEN;
        }
    }
    Ok(LossSums { sum: sum.value(), count, grad })
}

/// Mean squared error over all elements, or only over included
/// channel-patches when `include` is given.
pub fn loss_time(pred: &Tensor, target: &Tensor, include: Option<&[bool]>) -> Result<(f64, Tensor)> {
    let s = time_sums(pred, target, include)?;
    finish(s)
}

fn finish(mut s: LossSums) -> Result<(f64, Tensor)> {
    if s.count == 0 {
        return Err(Error::EmptyMask);
    }
    let n = s.count as f64;
    s.grad.scale(1.0 / n);
    Ok((s.sum / n, s.grad))
}

/// `min over δ ∈ {0, −2π, 2π} of (target − (pred + δ))²` and its derivative
/// in `pred`.
pub fn phase_term(target: f64, pred: f64) -> Result<(f64, f64)> {
    if !(pred.abs() <= PHASE_LIMIT) {
        return Err(Error::PhaseOutOfRange { value: pred });
    }
    let mut best = (f64::INFINITY, 0.0);
    for delta in [0.0, -2.0 * PI, 2.0 * PI] {
        let e = target - (pred + delta);
        if e * e < best.0 {
            best = (e * e, -2.0 * e);
        }
    }
    Ok(best)
}

/// Frequency-domain sums: amplitude squared errors plus wrapped phase errors
/// over the 320 bins of each included channel-patch. `count` is the number
/// of bins, so `sum / count = L_amp + L_phase`.
pub fn freq_sums(pred: &Tensor, target: &Tensor, include: Option<&[bool]>) -> Result<(LossSums, f64, f64)> {
    let channels = check_pair(pred, target, include)?;
    let mut grad = Tensor::zeros(pred.rows(), pred.cols());
    let (mut amp, mut phase) = (Acc::default(), Acc::default());
    let mut count = 0;
    let k = SPECTRUM_BINS;
    for r in 0..pred.rows() {
        for c in 0..channels {
            if include.is_some_and(|m| !m[r * channels + c]) {
                continue;
            }
            let lo = c * PATCH_LEN;
            let p = &pred.row(r)[lo..lo + PATCH_LEN];
            let t = &target.row(r)[lo..lo + PATCH_LEN];
            let g = &mut grad.row_mut(r)[lo..lo + PATCH_LEN];
            for i in 0..k {
                let d = p[i] - t[i];
                amp.add(d * d);
                g[i] = 2.0 * d;
                let (v, dv) = phase_term(t[k + i], p[k + i])?;
                phase.add(v);
                g[k + i] = dv;
            }
            count += k;
        }
    }
    let (amp, phase) = (amp.value(), phase.value());
    Ok((LossSums { sum: amp + phase, count, grad }, amp, phase))
}

/// `L_amp + L_phase` as means over included bins.
pub fn loss_freq(pred: &Tensor, target: &Tensor, include: Option<&[bool]>) -> Result<(f64, Tensor)> {
    let (s, _, _) = freq_sums(pred, target, include)?;
    finish(s)
}

fn norms(x: &Tensor) -> Result<Vec<f64>> {
    (0..x.rows())
        .map(|r| {
            let n = libm::sqrt(x.row(r).iter().map(|v| v * v).sum::<f64>());
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::ZeroVector { row: r })
            }
        })
        .collect()
}

/// Sum over anchors `k` of `−log softmax_m(cos(a_k, c_m)/τ)[k]`, with
/// gradients for both sides.
fn info_nce(a: &Tensor, c: &Tensor, tau: f64) -> Result<(f64, Tensor, Tensor)> {
    let n = a.rows();
    let (na, nc) = (norms(a)?, norms(c)?);
    let mut sim = vec![0.0; n * n];
    for k in 0..n {
        for m in 0..n {
            let dot: f64 = a.row(k).iter().zip(c.row(m)).map(|(x, y)| x * y).sum();
            sim[k * n + m] = dot / (na[k] * nc[m]);
        }
    }
    let mut loss = 0.0;
    let mut dsim = vec![0.0; n * n];
    for k in 0..n {
        let row = &sim[k * n..(k + 1) * n];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / tau));
        let z: f64 = row.iter().map(|&v| libm::exp(v / tau - max)).sum();
        loss += max + libm::log(z) - row[k] / tau;
        for m in 0..n {
            let p = libm::exp(row[m] / tau - max) / z;
            dsim[k * n + m] = (p - if m == k { 1.0 } else { 0.0 }) / tau;
        }
    }
    let d = a.cols();
    let mut ga = Tensor::zeros(n, d);
    let mut gc = Tensor::zeros(n, d);
    for k in 0..n {
        for m in 0..n {
            let w = dsim[k * n + m];
            if w == 0.0 {
                continue;
            }
            let s = sim[k * n + m];
            let inv = 1.0 / (na[k] * nc[m]);
            let (ak, cm) = (a.row(k).to_vec(), c.row(m).to_vec());
            for (j, g) in ga.row_mut(k).iter_mut().enumerate() {
                *g += w * (cm[j] * inv - s * ak[j] / (na[k] * na[k]));
            }
            for (j, g) in gc.row_mut(m).iter_mut().enumerate() {
                *g += w * (ak[j] * inv - s * cm[j] / (nc[m] * nc[m]));
            }
        }
    }
    Ok((loss, ga, gc))
}

fn check_pooled(pooled: &[Tensor], tau: f64) -> Result<(usize, usize)> {
    if !(tau > 0.0) {
        return Err(Error::config("tau", "must be positive"));
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidInput("contrastive loss needs at least two modalities".into()));
    }
    let (n, d) = pooled[0].shape();
    if n < 2 {
        return Err(Error::InvalidInput("contrastive loss needs a batch of at least 2".into()));
    }
    if pooled.iter().any(|t| t.shape() != (n, d)) {
        return Err(Error::shape("pooled embeddings", alloc::format!("{n}x{d}"), "mixed shapes"));
    }
    Ok((n, d))
}

/// Mean InfoNCE over every ordered modality pair `(i, j)`, `i ≠ j`, and
/// every batch index; the positive for `x_k^i` is `x_k^j`.
pub fn loss_cl_pairwise(pooled: &[Tensor], tau: f64) -> Result<(f64, Vec<Tensor>)> {
    let (n, d) = check_pooled(pooled, tau)?;
    let m = pooled.len();
    let mut grads: Vec<Tensor> = (0..m).map(|_| Tensor::zeros(n, d)).collect();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (l, ga, gc) = info_nce(&pooled[i], &pooled[j], tau)?;
            total += l;
            grads[i].add_assign(&ga);
            grads[j].add_assign(&gc);
        }
    }
    let denom = (m * (m - 1) * n) as f64;
    for g in &mut grads {
        g.scale(1.0 / denom);
    }
    Ok((total / denom, grads))
}

/// Mean InfoNCE of each modality against the mean of the other modalities,
/// over modalities and batch indices.
pub fn loss_cl_loo(pooled: &[Tensor], tau: f64) -> Result<(f64, Vec<Tensor>)> {
    let (n, d) = check_pooled(pooled, tau)?;
    let m = pooled.len();
    let mut grads: Vec<Tensor> = (0..m).map(|_| Tensor::zeros(n, d)).collect();
    let mut total = 0.0;
    let others = (m - 1) as f64;
    for i in 0..m {
        let mut mean = Tensor::zeros(n, d);
        for (j, t) in pooled.iter().enumerate() {
            if j != i {
                mean.add_assign(t);
            }
        }
        mean.scale(1.0 / others);
        let (l, ga, mut gm) = info_nce(&pooled[i], &mean, tau)?;
        total += l;
        grads[i].add_assign(&ga);
        gm.scale(1.0 / others);
        for (j, g) in grads.iter_mut().enumerate() {
            if j != i {
                g.add_assign(&gm);
            }
        }
    }
    let denom = (m * n) as f64;
    for g in &mut grads {
        g.scale(1.0 / denom);
    }
    Ok((total / denom, grads))
}

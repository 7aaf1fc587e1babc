use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, tag};
use crate::{Error, Result};

/// Redraws allowed per replicate when the metric is undefined on it.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval of `metric` over resamples (with replacement) of
/// `n` items. `metric` receives the resampled item indices.
pub fn bootstrap_ci(
    n: usize,
    config: BootstrapConfig,
    mut metric: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<(f64, f64)> {
    if config.n_boot < 100 {
        return Err(Error::config("n_boot", "needs at least 100 resamples"));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::config("level", "must lie in (0, 1)"));
    }
    if n == 0 {
        return Err(Error::UndefinedMetric("bootstrap of nothing"));
    }
    let mut r = rng::stream(config.seed, &[tag::BOOTSTRAP]);
    let mut stats = Vec::with_capacity(config.n_boot);
    let mut idx = alloc::vec![0usize; n];
    for _ in 0..config.n_boot {
        let mut value = None;
        for _ in 0..=MAX_RETRIES {
            idx.iter_mut().for_each(|i| *i = r.gen_range(0..n));
            match metric(&idx) {
                Ok(v) => {
                    value = Some(v);
                    break;
                }
                Err(Error::UndefinedMetric(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        stats.push(value.ok_or(Error::UndefinedMetric("metric undefined on repeated resamples"))?);
    }
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - config.level) / 2.0;
    Ok((quantile(&stats, tail), quantile(&stats, 1.0 - tail)))
}

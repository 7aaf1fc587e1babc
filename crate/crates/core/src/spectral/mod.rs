//! DFT utilities, the amplitude transform used by frequency-domain losses and
//! the two fixed baseline embeddings.

pub mod fft;

use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{ChannelLayout, Modality};
use crate::preprocess::{resample, Rate};
use crate::{Error, Result, PATCH_LEN, SAMPLE_RATE_HZ};

pub use fft::RealDft;

/// Bins kept per 640-sample patch: DC through 319, Nyquist excluded.
pub const SPECTRUM_BINS: usize = PATCH_LEN / 2;
/// Stabilizer inside the logarithm of [`amp_transform`].
pub const AMP_EPS: f64 = 1e-6;
/// Offset that maps zero amplitude to exactly zero.
pub const AMP_OFFSET: f64 = 6.0;
pub const BASELINE_DIM: usize = 512;
/// Frequency bins sampled per modality by the frequency baseline.
pub const BASELINE_FREQ_BINS: usize = 64;
pub const BASELINE_DECIMATION: u64 = 5;

/// Amplitude and principal-value phase of a real patch, Nyquist excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpectrum {
    pub amplitude: Vec<f64>,
    /// Radians in `(-π, π]`; exactly 0 where the bin is exactly 0.
    pub phase: Vec<f64>,
    /// Real-valued Nyquist coefficient (even lengths only), kept so the
    /// patch can be reconstructed exactly.
    pub nyquist: f64,
}

/// Principal value in `(-π, π]`, 0 for a zero coefficient.
pub fn principal_phase(c: Complex64) -> f64 {
    if c.re == 0.0 && c.im == 0.0 {
        return 0.0;
    }
    let p = libm::atan2(c.im, c.re);
    if p <= -core::f64::consts::PI {
        core::f64::consts::PI
    } else {
        p
    }
}

/// Spectrum of a real signal of even length `n`: bins `0..n/2`.
pub fn rdft_with(dft: &RealDft, x: &[f64]) -> PatchSpectrum {
    let bins = dft.forward(x);
    let keep = dft.len().div_ceil(2);
    let nyquist = if dft.len() % 2 == 0 {
        bins[dft.len() / 2].re
    } else {
        0.0
    };
    PatchSpectrum {
        amplitude: bins[..keep].iter().map(|c| c.norm()).collect(),
        phase: bins[..keep].iter().map(|&c| principal_phase(c)).collect(),
        nyquist,
    }
}

/// Spectrum of one 640-sample patch.
pub fn rdft(patch: &[f64]) -> Result<PatchSpectrum> {
    if patch.len() != PATCH_LEN {
        return Err(Error::shape("rdft patch", PATCH_LEN, patch.len()));
    }
    if patch.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { term: "rdft input" });
    }
    Ok(rdft_with(&RealDft::new(PATCH_LEN), patch))
}

/// Inverse of [`rdft_with`] for a signal of length `dft.len()`.
pub fn irdft_with(dft: &RealDft, spectrum: &PatchSpectrum) -> Vec<f64> {
    let n = dft.len();
    let mut half: Vec<Complex64> = spectrum
        .amplitude
        .iter()
        .zip(&spectrum.phase)
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    if n % 2 == 0 {
        half.push(Complex64::new(spectrum.nyquist, 0.0));
    }
    dft.inverse(&half)
}

pub fn irdft(spectrum: &PatchSpectrum) -> Vec<f64> {
    irdft_with(&RealDft::new(PATCH_LEN), spectrum)
}

/// `log10(a + 1e-6) + 6` for `a ≥ 0`; maps 0 to 0.
pub fn amp_transform(amplitude: f64) -> Result<f64> {
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidInput(alloc::format!(
            "amplitude must be nonnegative, got {amplitude}"
        )));
    }
    Ok(amp_transform_unchecked(amplitude))
}

#[inline]
pub(crate) fn amp_transform_unchecked(amplitude: f64) -> f64 {
    // 1e-6 is not exactly representable, so pin the zero end explicitly.
    if amplitude == 0.0 {
        return 0.0;
    }
    (libm::log10(amplitude + AMP_EPS) + AMP_OFFSET).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Time,
    Freq,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Time => "baseline_time",
            BaselineKind::Freq => "baseline_freq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEmbedding {
    pub kind: BaselineKind,
    pub vector: Vec<f64>,
}

/// Time baseline: the four representative channels (C3-M2, NASAL,
/// EKG_L-EKG_R, LEG) low-passed and decimated 128 → 25.6 Hz, 128 samples
/// each. `patch` is channel-major `[channels × 640]` in `layout` order.
pub fn baseline_time_embed(patch: &[f64], layout: &ChannelLayout) -> Result<BaselineEmbedding> {
    check_patch(patch, layout)?;
    let reps = layout.representative()?;
    let from = Rate::hz(SAMPLE_RATE_HZ as u64);
    let to = Rate::new(SAMPLE_RATE_HZ as u64, BASELINE_DECIMATION);
    let mut vector = Vec::with_capacity(BASELINE_DIM);
    for c in reps {
        vector.extend(resample(
            &patch[c * PATCH_LEN..(c + 1) * PATCH_LEN],
            from,
            to,
        )?);
    }
    debug_assert_eq!(vector.len(), BASELINE_DIM);
    Ok(BaselineEmbedding {
        kind: BaselineKind::Time,
        vector,
    })
}

/// Bin indices `round(j · 319 / 63)` for `j = 0..64`.
pub fn baseline_freq_bins() -> [usize; BASELINE_FREQ_BINS] {
    let span = (SPECTRUM_BINS - 1) as f64 / (BASELINE_FREQ_BINS - 1) as f64;
    core::array::from_fn(|j| libm::round(j as f64 * span) as usize)
}

/// Frequency baseline: per modality, channel-averaged amplitude and phase at
/// 64 evenly spaced bins; transformed amplitudes then phases, modalities in
/// BAS, RESP, EKG, EMG order.
pub fn baseline_freq_embed(patch: &[f64], layout: &ChannelLayout) -> Result<BaselineEmbedding> {
    check_patch(patch, layout)?;
    let dft = RealDft::new(PATCH_LEN);
    let bins = baseline_freq_bins();
    let mut vector = Vec::with_capacity(BASELINE_DIM);
    for m in Modality::ALL {
        let chans = layout.channels_of(m);
        if chans.is_empty() {
            return Err(Error::InvalidInput(alloc::format!(
                "layout has no {m} channel"
            )));
        }
        let mut amp = [0.0; BASELINE_FREQ_BINS];
        let mut phase = [0.0; BASELINE_FREQ_BINS];
        for &c in &chans {
            let s = rdft_with(&dft, &patch[c * PATCH_LEN..(c + 1) * PATCH_LEN]);
            for (j, &k) in bins.iter().enumerate() {
                amp[j] += s.amplitude[k];
                phase[j] += s.phase[k];
            }
        }
        let n = chans.len() as f64;
        vector.extend(amp.iter().map(|a| amp_transform_unchecked(a / n)));
        vector.extend(phase.iter().map(|p| p / n));
    }
    Ok(BaselineEmbedding {
        kind: BaselineKind::Freq,
        vector,
    })
}

pub fn baseline_embed(
    kind: BaselineKind,
    patch: &[f64],
    layout: &ChannelLayout,
) -> Result<BaselineEmbedding> {
    match kind {
        BaselineKind::Time => baseline_time_embed(patch, layout),
        BaselineKind::Freq => baseline_freq_embed(patch, layout),
    }
}

fn check_patch(patch: &[f64], layout: &ChannelLayout) -> Result<()> {
    let expected = layout.len() * PATCH_LEN;
    if patch.len() != expected {
        return Err(Error::shape("baseline patch", expected, patch.len()));
    }
    if patch.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: "baseline input",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;

//! Butterworth low-pass design (bilinear transform, second-order sections)
//! and forward-backward zero-phase filtering.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_ORDER: usize = 8;

/// Fraction of the target Nyquist frequency used as anti-aliasing cutoff.
pub const ANTI_ALIAS_FRACTION: f64 = 0.9;

/// One biquad (or first-order section when `b[2] == a[2] == 0`), with
/// `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[2] * g]
    }

    fn poles(&self) -> Vec<Complex64> {
        let (a1, a2) = (self.a[1], self.a[2]);
        if a2 == 0.0 {
            return vec![Complex64::new(-a1, 0.0)];
        }
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        vec![(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub sections: Vec<Section>,
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

impl FilterSpec {
    /// Transfer function as numerator and denominator polynomials in `z⁻¹`.
    pub fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &self.sections {
            let len = if s.a[2] == 0.0 && s.b[2] == 0.0 { 2 } else { 3 };
            b = poly_mul(&b, &s.b[..len]);
            a = poly_mul(&a, &s.a[..len]);
        }
        (b, a)
    }

    /// |H(e^{iω})| at frequency `f_hz`.
    pub fn gain_at(&self, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.sample_rate_hz;
        let z_inv = Complex64::new(libm::cos(w), -libm::sin(w));
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(Section::poles).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Causal filtering with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            run_section(s, &mut y, [0.0, 0.0]);
        }
        y
    }
}

fn run_section(s: &Section, x: &mut [f64], state: [f64; 2]) {
    let [b0, b1, b2] = s.b;
    let [_, a1, a2] = s.a;
    let (mut z1, mut z2) = (state[0], state[1]);
    for v in x.iter_mut() {
        let xi = *v;
        let y = b0 * xi + z1;
        z1 = b1 * xi - a1 * y + z2;
        z2 = b2 * xi - a2 * y;
        *v = y;
    }
}

/// Butterworth low-pass of the given order with −3 dB point at `cutoff_hz`.
pub fn design_lowpass(cutoff_hz: f64, order: usize, sample_rate_hz: f64) -> Result<FilterSpec> {
    if order == 0 {
        return Err(Error::config("order", "must be positive"));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::config("sample_rate_hz", "must be positive"));
    }
    let nyquist = sample_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::config(
            "cutoff_hz",
            alloc::format!("{cutoff_hz} Hz not inside (0, {nyquist}) Hz"),
        ));
    }
    let fs2 = 2.0 * sample_rate_hz;
    // Prewarped analog cutoff.
    let wc = fs2 * libm::tan(PI * cutoff_hz / sample_rate_hz);
    let bilinear = |p: Complex64| (fs2 + p) / (fs2 - p);
    let mut sections = Vec::new();
    for k in 0..order / 2 {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::new(libm::cos(theta), libm::sin(theta)) * wc;
        let z = bilinear(p);
        let a = [1.0, -2.0 * z.re, z.norm_sqr()];
        let g = (a[0] + a[1] + a[2]) / 4.0;
        sections.push(Section {
            b: [g, 2.0 * g, g],
            a,
        });
    }
    if order % 2 == 1 {
        let z = bilinear(Complex64::new(-wc, 0.0));
        let a = [1.0, -z.re, 0.0];
        let g = (1.0 + a[1]) / 2.0;
        sections.push(Section { b: [g, g, 0.0], a });
    }
    Ok(FilterSpec {
        order,
        cutoff_hz,
        sample_rate_hz,
        sections,
    })
}

/// Forward-backward filtering with odd-reflection padding of `3 × order`
/// samples at each end and steady-state initial conditions. The result has
/// zero phase and squared magnitude response.
pub fn filtfilt(signal: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    let n = signal.len();
    let pad = 3 * spec.order;
    if n <= pad {
        return Err(Error::InvalidInput(alloc::format!(
            "signal of {n} samples too short for zero-phase filtering (needs > {pad})"
        )));
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (signal[0], signal[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let apply = |buf: &mut Vec<f64>| {
        // The cascade's input to each section is scaled by the DC gains of
        // the preceding ones (all 1 for designed filters, kept general).
        let mut level = buf[0];
        for s in &spec.sections {
            let st = s.step_state();
            run_section(s, buf, [st[0] * level, st[1] * level]);
            level *= s.dc_gain();
        }
    };
    apply(&mut ext);
    ext.reverse();
    apply(&mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_magnitude() {
        let spec = design_lowpass(20.0, 8, 128.0).unwrap();
        assert!((spec.gain_at(0.0) - 1.0).abs() < 1e-9);
        assert!((spec.gain_at(20.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        // Analog bound 1/sqrt(1 + 2^16); bilinear warping only steepens it.
        let analog = 1.0 / (1.0 + 2f64.powi(16)).sqrt();
        assert!(spec.gain_at(40.0) <= analog * 1.01);
        assert!(spec.is_stable());
    }

    #[test]
    fn odd_orders_and_polynomials() {
        let spec = design_lowpass(10.0, 5, 100.0).unwrap();
        assert_eq!(spec.sections.len(), 3);
        assert!((spec.gain_at(10.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        let (b, a) = spec.coefficients();
        assert_eq!(b.len(), 6);
        assert_eq!(a.len(), 6);
        let dc = b.iter().sum::<f64>() / a.iter().sum::<f64>();
        assert!((dc - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_cutoff_at_or_above_nyquist() {
        assert!(design_lowpass(64.0, 8, 128.0).is_err());
        assert!(design_lowpass(0.0, 8, 128.0).is_err());
        assert!(design_lowpass(10.0, 0, 128.0).is_err());
    }

    #[test]
    fn constant_passes_unchanged() {
        let spec = design_lowpass(11.52, 8, 128.0).unwrap();
        let y = filtfilt(&[3.25; 640], &spec).unwrap();
        assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-9));
    }

    #[test]
    fn symmetric_pulse_stays_symmetric() {
        let spec = design_lowpass(10.0, 8, 128.0).unwrap();
        let n = 513;
        let k = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let d = i as f64 - k as f64;
                (-(d * d) / 18.0).exp()
            })
            .collect();
        let y = filtfilt(&x, &spec).unwrap();
        for d in 1..200 {
            assert!((y[k - d] - y[k + d]).abs() < 1e-6);
        }
    }

    #[test]
    fn sine_below_cutoff_keeps_amplitude() {
        let spec = design_lowpass(20.0, 8, 128.0).unwrap();
        let x: Vec<f64> = (0..2048)
            .map(|i| (2.0 * PI * 5.0 * i as f64 / 128.0).sin())
            .collect();
        let y = filtfilt(&x, &spec).unwrap();
        let expected = spec.gain_at(5.0).powi(2);
        let peak = y[500..1500].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - expected).abs() < 0.02);
        assert!((peak - 1.0).abs() < 0.02);
    }

    #[test]
    fn too_short_is_an_error() {
        let spec = design_lowpass(10.0, 8, 128.0).unwrap();
        assert!(filtfilt(&[0.0; 24], &spec).is_err());
        assert!(filtfilt(&[0.0; 25], &spec).is_ok());
    }
}

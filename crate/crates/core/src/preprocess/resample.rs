//! Rational-factor polyphase resampling.

use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use super::filter::{design_lowpass, filtfilt, ANTI_ALIAS_FRACTION, DEFAULT_ORDER};
use crate::{Error, Result};

/// A sampling rate `num / den` Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub const fn hz(hz: u64) -> Self {
        Self { num: hz, den: 1 }
    }

    pub const fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn validate(self, field: &'static str) -> Result<()> {
        if self.num == 0 || self.den == 0 {
            return Err(Error::config(
                field,
                "sampling rate must be a positive rational",
            ));
        }
        Ok(())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zero crossings of the interpolation kernel on each side, measured at the
/// lower of the two rates.
const KERNEL_ZERO_CROSSINGS: usize = 24;
const KAISER_BETA: f64 = 8.6;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

/// Polyphase filter bank for an up-by-`up`, down-by-`down` conversion.
struct PolyphaseBank {
    up: usize,
    down: usize,
    /// Taps span input offsets `-(half - 1)..=half` around the base sample.
    half: usize,
    phases: Vec<Vec<f64>>,
}

impl PolyphaseBank {
    fn new(up: usize, down: usize) -> Self {
        let cutoff = (up as f64 / down as f64).min(1.0);
        let reach = KERNEL_ZERO_CROSSINGS as f64 / cutoff;
        let half = libm::ceil(reach) as usize;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..2 * half)
                    .map(|i| {
                        let t = i as isize - (half as isize - 1);
                        let d = frac - t as f64;
                        let u = d / reach;
                        if u.abs() >= 1.0 {
                            return 0.0;
                        }
                        let w = bessel_i0(KAISER_BETA * libm::sqrt(1.0 - u * u)) / i0_beta;
                        cutoff * sinc(cutoff * d) * w
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                for v in &mut taps {
                    *v /= sum;
                }
                taps
            })
            .collect();
        Self {
            up,
            down,
            half,
            phases,
        }
    }

    fn apply(&self, x: &[f64], out_len: usize) -> Vec<f64> {
        let n = x.len() as isize;
        let at = |k: isize| -> f64 {
            // Odd reflection about the end samples, clamped beyond one period.
            if k < 0 {
                let r = (-k).min(n - 1);
                2.0 * x[0] - x[r as usize]
            } else if k >= n {
                let r = (n - 1 - (k - (n - 1))).max(0);
                2.0 * x[(n - 1) as usize] - x[r as usize]
            } else {
                x[k as usize]
            }
        };
        (0..out_len)
            .map(|j| {
                let pos = j * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let first = base - (self.half as isize - 1);
                taps.iter()
                    .enumerate()
                    .map(|(i, w)| w * at(first + i as isize))
                    .sum()
            })
            .collect()
    }
}

/// Resamples `signal` from `from` to `to`. Downsampling first applies a
/// zero-phase Butterworth low-pass at 0.9 × the output Nyquist frequency.
/// The output has `round(n · to / from)` samples.
pub fn resample(signal: &[f64], from: Rate, to: Rate) -> Result<Vec<f64>> {
    from.validate("from_hz")?;
    to.validate("to_hz")?;
    let up_raw = to.num as u128 * from.den as u128;
    let down_raw = to.den as u128 * from.num as u128;
    if up_raw == down_raw {
        return Ok(signal.to_vec());
    }
    let g = gcd(up_raw as u64, down_raw as u64) as u128;
    let (up, down) = ((up_raw / g) as usize, (down_raw / g) as usize);
    let out_len = libm::round(signal.len() as f64 * up as f64 / down as f64) as usize;
    if signal.is_empty() || out_len == 0 {
        return Ok(Vec::new());
    }
    let filtered;
    let input = if down > up {
        let fs = from.as_f64();
        let spec = design_lowpass(ANTI_ALIAS_FRACTION * to.as_f64() / 2.0, DEFAULT_ORDER, fs)?;
        filtered = filtfilt(signal, &spec)?;
        &filtered[..]
    } else {
        signal
    };
    Ok(PolyphaseBank::new(up, down).apply(input, out_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fft::RealDft;
    use alloc::vec;
    use rand::Rng;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(2.0 * PI * freq * i as f64 / fs))
            .collect()
    }

    #[test]
    fn identity_is_bit_exact() {
        let x = sine(3.3, 128.0, 1000);
        assert_eq!(resample(&x, Rate::hz(128), Rate::hz(128)).unwrap(), x);
        assert_eq!(resample(&x, Rate::hz(128), Rate::new(256, 2)).unwrap(), x);
    }

    #[test]
    fn lengths_round() {
        let x = vec![0.0; 1001];
        assert_eq!(
            resample(&x, Rate::hz(200), Rate::hz(128)).unwrap().len(),
            641
        );
        assert_eq!(
            resample(&x[..640], Rate::hz(128), Rate::new(128, 5))
                .unwrap()
                .len(),
            128
        );
        assert!(resample(&x, Rate::hz(0), Rate::hz(128)).is_err());
    }

    #[test]
    fn sine_200_to_128_keeps_amplitude() {
        let x = sine(10.0, 200.0, 200 * 30);
        let y = resample(&x, Rate::hz(200), Rate::hz(128)).unwrap();
        assert_eq!(y.len(), 128 * 30);
        let reference = sine(10.0, 128.0, y.len());
        for i in 256..y.len() - 256 {
            assert!(
                (y[i] - reference[i]).abs() < 0.02,
                "sample {i}: {} vs {}",
                y[i],
                reference[i]
            );
        }
    }

    #[test]
    fn round_trip_of_band_limited_signal() {
        let fs = 128.0;
        let x: Vec<f64> = (0..128 * 20)
            .map(|i| {
                let t = i as f64 / fs;
                libm::sin(2.0 * PI * 3.0 * t) + 0.5 * libm::cos(2.0 * PI * 17.5 * t + 0.3)
                    - 0.25 * libm::sin(2.0 * PI * 31.0 * t + 1.0)
            })
            .collect();
        let up = resample(&x, Rate::hz(128), Rate::hz(256)).unwrap();
        let back = resample(&up, Rate::hz(256), Rate::hz(128)).unwrap();
        assert_eq!(back.len(), x.len());
        let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = x.iter().map(|a| a * a).sum();
        assert!(
            libm::sqrt(err / norm) < 1e-3,
            "relative error {}",
            libm::sqrt(err / norm)
        );
    }

    #[test]
    fn white_noise_is_band_limited() {
        let mut r = crate::rng::stream(4, &[]);
        let x: Vec<f64> = (0..200 * 64).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y = resample(&x, Rate::hz(200), Rate::hz(128)).unwrap();
        let y = &y[..8192];
        let spec = RealDft::new(y.len()).forward(y);
        let power: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        // Bins above 0.9 × 64 Hz hold what survives of the aliased band.
        let edge = (57.6 / 128.0 * y.len() as f64) as usize;
        let high: f64 = power[edge..].iter().sum();
        assert!(high / total < 0.01, "fraction {}", high / total);
    }
}

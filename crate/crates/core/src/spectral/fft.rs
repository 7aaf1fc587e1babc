//! Real-input DFT of arbitrary length.
//!
//! With the `std` feature the transform is backed by `rustfft`; without it
//! a direct O(n²) evaluation over a precomputed twiddle table is used.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

#[cfg(feature = "std")]
use std::sync::Arc;

pub struct RealDft {
    n: usize,
    #[cfg(feature = "std")]
    forward: Arc<dyn rustfft::Fft<f64>>,
    #[cfg(feature = "std")]
    inverse: Arc<dyn rustfft::Fft<f64>>,
    #[cfg(not(feature = "std"))]
    twiddles: Vec<Complex64>,
}

impl RealDft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DFT length must be positive");
        #[cfg(feature = "std")]
        {
            let mut planner = rustfft::FftPlanner::new();
            Self {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        }
        #[cfg(not(feature = "std"))]
        {
            let twiddles = (0..n)
                .map(|k| {
                    let a = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
                    Complex64::new(libm::cos(a), libm::sin(a))
                })
                .collect();
            Self { n, twiddles }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bins `0..=n/2` of the DFT of a real signal.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "DFT input length");
        let half = self.n / 2 + 1;
        #[cfg(feature = "std")]
        {
            let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.forward.process(&mut buf);
            buf.truncate(half);
            buf
        }
        #[cfg(not(feature = "std"))]
        {
            (0..half)
                .map(|k| {
                    x.iter()
                        .enumerate()
                        .map(|(t, &v)| self.twiddles[(k * t) % self.n] * v)
                        .sum()
                })
                .collect()
        }
    }

    /// Real signal whose DFT has the given non-negative-frequency bins
    /// (`n/2 + 1` of them); the negative half is filled by conjugate symmetry.
    pub fn inverse(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(half.len(), n / 2 + 1, "inverse DFT bin count");
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[..half.len()].copy_from_slice(half);
        for k in half.len()..n {
            full[k] = half[n - k].conj();
        }
        // Bins that must be real for a real signal.
        full[0].im = 0.0;
        if n % 2 == 0 {
            full[n / 2].im = 0.0;
        }
        #[cfg(feature = "std")]
        {
            self.inverse.process(&mut full);
            full.iter().map(|c| c.re / n as f64).collect()
        }
        #[cfg(not(feature = "std"))]
        {
            (0..n)
                .map(|t| {
                    let s: Complex64 = full
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| c * self.twiddles[(k * t) % n].conj())
                        .sum();
                    s.re / n as f64
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n / 2 + 1)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let a = -2.0 * core::f64::consts::PI * (k * t) as f64 / n as f64;
                        Complex64::new(v * a.cos(), v * a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum_and_inverts() {
        for n in [640, 9, 128] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
            let dft = RealDft::new(n);
            let got = dft.forward(&x);
            for (a, b) in got.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-9);
            }
            let back = dft.inverse(&got);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

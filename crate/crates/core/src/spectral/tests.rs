use super::*;
use alloc::vec;
use core::f64::consts::PI;
use proptest::prelude::*;

fn canonical_patch(f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(16 * PATCH_LEN);
    for c in 0..16 {
        for t in 0..PATCH_LEN {
            out.push(f(c, t));
        }
    }
    out
}

#[test]
fn spectrum_of_simple_signals() {
    let zero = rdft(&[0.0; PATCH_LEN]).unwrap();
    assert_eq!(zero.amplitude.len(), SPECTRUM_BINS);
    assert!(zero.amplitude.iter().chain(&zero.phase).all(|v| *v == 0.0));

    let c = rdft(&[-1.5; PATCH_LEN]).unwrap();
    assert!((c.amplitude[0] - 640.0 * 1.5).abs() < 1e-9);
    assert!(c.amplitude[1..].iter().all(|a| *a < 1e-9));

    let k0 = 37;
    let x: Vec<f64> = (0..PATCH_LEN)
        .map(|n| (2.0 * PI * (k0 * n) as f64 / 640.0).cos())
        .collect();
    let s = rdft(&x).unwrap();
    assert!((s.amplitude[k0] - 320.0).abs() < 1e-9);
    assert!(s.phase[k0].abs() < 1e-9);
    assert!(rdft(&[0.0; 10]).is_err());
}

#[test]
fn phase_is_principal() {
    assert_eq!(principal_phase(Complex64::new(-1.0, -0.0)), PI);
    assert_eq!(principal_phase(Complex64::new(-1.0, 0.0)), PI);
    assert_eq!(principal_phase(Complex64::new(0.0, 0.0)), 0.0);
    assert!((principal_phase(Complex64::new(0.0, -2.0)) + PI / 2.0).abs() < 1e-15);
}

#[test]
fn amp_transform_values() {
    assert_eq!(amp_transform(0.0).unwrap(), 0.0);
    assert!((amp_transform(1e-6).unwrap() - libm::log10(2.0)).abs() < 1e-12);
    assert!((amp_transform(1.0).unwrap() - (libm::log10(1.0 + 1e-6) + 6.0)).abs() < 1e-12);
    assert!((amp_transform(1.0).unwrap() - 6.000_000_43).abs() < 1e-8);
    assert!(amp_transform(-1e-9).is_err());
    assert!(amp_transform(f64::NAN).is_err());
}

proptest! {
    #[test]
    fn amp_transform_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(amp_transform(lo).unwrap() <= amp_transform(hi).unwrap());
        prop_assert!(amp_transform(lo).unwrap() >= 0.0);
    }

    #[test]
    fn parseval_and_round_trip(x in prop::collection::vec(-100.0f64..100.0, PATCH_LEN)) {
        let dft = RealDft::new(PATCH_LEN);
        let full = dft.forward(&x);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        // Full bin set: interior bins appear twice in the two-sided spectrum.
        let spectral: f64 = full.iter().enumerate().map(|(k, c)| {
            let w = if k == 0 || k == PATCH_LEN / 2 { 1.0 } else { 2.0 };
            w * c.norm_sqr()
        }).sum::<f64>() / PATCH_LEN as f64;
        prop_assert!((energy - spectral).abs() <= 1e-6 * energy.max(1e-300));

        let s = rdft(&x).unwrap();
        let back = irdft(&s);
        let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(libm::sqrt(err) <= 1e-5 * libm::sqrt(energy).max(1e-300));
    }

    #[test]
    fn freq_baseline_ignores_order_within_modality(seed in 0u64..1000) {
        use rand::Rng;
        let mut r = crate::rng::stream(seed, &[]);
        let layout = ChannelLayout::canonical();
        let patch: Vec<f64> = (0..16 * PATCH_LEN).map(|_| r.gen_range(-1.0..1.0)).collect();
        let a = baseline_freq_embed(&patch, &layout).unwrap();
        // Swap two BAS channels and two RESP channels.
        let mut swapped = patch.clone();
        for (i, j) in [(0usize, 5usize), (8, 11)] {
            for t in 0..PATCH_LEN {
                swapped.swap(i * PATCH_LEN + t, j * PATCH_LEN + t);
            }
        }
        let b = baseline_freq_embed(&swapped, &layout).unwrap();
        for (x, y) in a.vector.iter().zip(&b.vector) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn time_baseline_of_constants() {
    let layout = ChannelLayout::canonical();
    let reps = layout.representative().unwrap();
    let levels = [0.5, -2.0, 3.25, 7.0];
    let patch = canonical_patch(|c, _| {
        reps.iter()
            .position(|&r| r == c)
            .map_or(99.0, |i| levels[i])
    });
    let e = baseline_time_embed(&patch, &layout).unwrap();
    assert_eq!(e.vector.len(), BASELINE_DIM);
    for (i, level) in levels.iter().enumerate() {
        assert!(e.vector[i * 128..(i + 1) * 128]
            .iter()
            .all(|v| (v - level).abs() < 1e-9));
    }
}

#[test]
fn time_baseline_needs_representatives() {
    let mut layout = ChannelLayout::canonical();
    layout.channels[11].name = "FLOW".into();
    assert!(baseline_time_embed(&vec![0.0; 16 * PATCH_LEN], &layout).is_err());
}

#[test]
fn freq_baseline_layout() {
    let layout = ChannelLayout::canonical();
    let bins = baseline_freq_bins();
    assert_eq!(bins[0], 0);
    assert_eq!(bins[63], 319);
    assert_eq!(bins[1], 5);

    let zero = baseline_freq_embed(&vec![0.0; 16 * PATCH_LEN], &layout).unwrap();
    assert_eq!(zero.vector.len(), BASELINE_DIM);
    assert!(zero.vector.iter().all(|v| *v == 0.0));

    let patch = canonical_patch(|c, t| ((c + 1) as f64 * 0.37 * t as f64).sin() + c as f64 * 0.01);
    let e = baseline_freq_embed(&patch, &layout).unwrap();
    let ekg = layout.index_of("EKG_L-EKG_R").unwrap();
    let s = rdft(&patch[ekg * PATCH_LEN..(ekg + 1) * PATCH_LEN]).unwrap();
    let block = &e.vector[2 * 128..3 * 128];
    for (j, &k) in bins.iter().enumerate() {
        assert!((block[j] - amp_transform(s.amplitude[k]).unwrap()).abs() < 1e-12);
        assert!((block[64 + j] - s.phase[k]).abs() < 1e-12);
    }
}

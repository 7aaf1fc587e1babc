use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

use super::*;
use crate::rng;

#[test]
fn cross_entropy_closed_forms() {
    let (l, _) = loss_ce(&Tensor::zeros(3, 5), &[0, 2, 4], None).unwrap();
    assert!((l - libm::log(5.0)).abs() < 1e-12);
    let (l, _) = loss_ce(&Tensor::zeros(1, 2), &[1], None).unwrap();
    assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
    let mut prev = f64::INFINITY;
    for margin in [1.0, 5.0, 20.0, 60.0] {
        let logits = Tensor::from_vec(1, 3, vec![margin, 0.0, 0.0]);
        let (l, _) = loss_ce(&logits, &[0], None).unwrap();
        assert!(l < prev);
        prev = l;
    }
    assert!(prev < 1e-25);
}

#[test]
fn cross_entropy_mask_and_errors() {
    let logits = Tensor::from_vec(2, 2, vec![0.0, 0.0, 50.0, -50.0]);
    let (l, g) = loss_ce(&logits, &[1, 1], Some(&[true, false])).unwrap();
    assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(g.row(1), &[0.0, 0.0]);
    assert_eq!(loss_ce(&logits, &[1, 1], Some(&[false, false])).unwrap_err(), Error::EmptyMask);
    assert!(loss_ce(&logits, &[2, 0], None).is_err());
}

#[test]
fn cross_entropy_gradient_and_row_order() {
    let mut r = rng::stream(1, &[]);
    let logits = Tensor::from_vec(4, 5, (0..20).map(|_| r.gen_range(-2.0..2.0)).collect());
    let labels = [0, 3, 4, 1];
    let (l, g) = loss_ce(&logits, &labels, None).unwrap();
    let h = 1e-6;
    for idx in 0..20 {
        let mut p = logits.clone();
        p.data_mut()[idx] += h;
        let mut m = logits.clone();
        m.data_mut()[idx] -= h;
        let fd = (loss_ce(&p, &labels, None).unwrap().0 - loss_ce(&m, &labels, None).unwrap().0) / (2.0 * h);
        assert!((fd - g.data()[idx]).abs() < 1e-8);
    }
    let order = [2, 0, 3, 1];
    let mut data = Vec::new();
    for &i in &order {
        data.extend_from_slice(logits.row(i));
    }
    let shuffled = Tensor::from_vec(4, 5, data);
    let labels2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    assert!((loss_ce(&shuffled, &labels2, None).unwrap().0 - l).abs() < 1e-12);
}

#[test]
fn binary_matches_two_class_ce() {
    let z = [0.3, -1.2, 4.0];
    let y = [true, false, false];
    let (l, g) = loss_binary(&z, &y).unwrap();
    let pairs = Tensor::from_vec(3, 2, z.iter().flat_map(|&v| [0.0, v]).collect());
    let (l2, g2) = loss_ce(&pairs, &[1, 0, 0], None).unwrap();
    assert!((l - l2).abs() < 1e-12);
    for i in 0..3 {
        assert!((g[i] - g2.get(i, 1)).abs() < 1e-12);
    }
}

#[test]
fn age_loss() {
    assert!((age_prediction(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    assert!(age_prediction(-700.0) > 0.0);
    // softplus(raw) = 0.5 exactly when raw = ln(e^0.5 − 1).
    let raw = libm::log(libm::exp(0.5) - 1.0);
    let (l, _) = loss_age(&[raw], &[50.0]).unwrap();
    assert!(l < 1e-30);
    let (_, g) = loss_age(&[0.2, -0.4], &[30.0, 80.0]).unwrap();
    let h = 1e-6;
    let fd = (loss_age(&[0.2 + h, -0.4], &[30.0, 80.0]).unwrap().0 - loss_age(&[0.2 - h, -0.4], &[30.0, 80.0]).unwrap().0) / (2.0 * h);
    assert!((fd - g[0]).abs() < 1e-9);
    assert!(loss_age(&[0.0], &[120.0]).is_err());
}

#[test]
fn cox_two_subject_case_and_shift() {
    let c = loss_coxph(&[0.0, 0.0], &[true, false], &[1.0, 2.0]).unwrap();
    assert!((c.loss - core::f64::consts::LN_2).abs() < 1e-12);
    for shift in [-5.0, 0.3, 100.0] {
        let c = loss_coxph(&[shift, shift], &[true, false], &[1.0, 2.0]).unwrap();
        assert!((c.loss - core::f64::consts::LN_2).abs() < 1e-12);
    }
    let c = loss_coxph(&[1.0, 2.0], &[false, false], &[1.0, 2.0]).unwrap();
    assert!(c.no_events && c.loss == 0.0 && c.grad.iter().all(|g| *g == 0.0));
    assert!(loss_coxph(&[f64::NAN], &[true], &[1.0]).is_err());
    assert!(loss_coxph(&[], &[], &[]).is_err());
}

/// Explicit risk-set enumeration with naive exp/log.
fn cox_oracle(h: &[f64], e: &[bool], t: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut ne = 0.0;
    for i in 0..h.len() {
        if !e[i] {
            continue;
        }
        ne += 1.0;
        let mut s = 0.0;
        for j in 0..h.len() {
            if t[j] >= t[i] {
                s += libm::exp(h[j]);
            }
        }
        total += h[i] - libm::log(s);
    }
    -total / ne
}

#[test]
fn cox_matches_oracle_and_differences() {
    let mut r = rng::stream(2, &[]);
    for trial in 0..200 {
        let n = r.gen_range(1..=8);
        let h: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        // Integer times make ties common.
        let t: Vec<f64> = (0..n).map(|_| r.gen_range(1..5) as f64).collect();
        let mut e: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        e[trial % n] = true;
        let c = loss_coxph(&h, &e, &t).unwrap();
        assert!((c.loss - cox_oracle(&h, &e, &t)).abs() < 1e-9);
        let shifted: Vec<f64> = h.iter().map(|v| v + 7.5).collect();
        assert!((loss_coxph(&shifted, &e, &t).unwrap().loss - c.loss).abs() < 1e-9);
        let k = trial % n;
        let step = 1e-6;
        let mut hp = h.clone();
        hp[k] += step;
        let mut hm = h.clone();
        hm[k] -= step;
        let fd = (cox_oracle(&hp, &e, &t) - cox_oracle(&hm, &e, &t)) / (2.0 * step);
        assert!((fd - c.grad[k]).abs() < 1e-7);
    }
}

fn outcomes(events: [bool; 13], time: f64) -> Vec<SurvivalOutcome> {
    OutcomeId::ALL
        .iter()
        .zip(events)
        .map(|(&outcome_id, event)| SurvivalOutcome { outcome_id, event, time_days: time })
        .collect()
}

#[test]
fn survival_total() {
    let a = outcomes([false; 13], 100.0);
    let b = outcomes([false; 13], 200.0);
    let s = loss_survival_total(&Tensor::zeros(2, 13), &[&a, &b]).unwrap();
    assert_eq!(s.loss, 0.0);
    assert!(s.no_events.iter().all(|f| *f));

    let mut ev = [false; 13];
    ev[12] = true;
    let a = outcomes(ev, 100.0);
    let mut h = Tensor::zeros(2, 13);
    h.set(0, 12, 0.4);
    let s = loss_survival_total(&h, &[&a, &b]).unwrap();
    assert_eq!(s.disease, 0.0);
    assert_eq!(s.loss, s.death);
    assert!((s.death - loss_coxph(&[0.4, 0.0], &[true, false], &[100.0, 200.0]).unwrap().loss).abs() < 1e-15);

    let mut ev = [false; 13];
    ev[0] = true;
    ev[1] = true;
    let a = outcomes(ev, 100.0);
    let mut h = Tensor::zeros(2, 13);
    for c in 0..2 {
        h.set(0, c, 1.3);
        h.set(1, c, -0.2);
    }
    let s = loss_survival_total(&h, &[&a, &b]).unwrap();
    assert_eq!(s.per_outcome[0], s.per_outcome[1]);
    assert!((s.disease - 2.0 * s.per_outcome[0]).abs() < 1e-15);
    assert!(loss_survival_total(&Tensor::zeros(2, 12), &[&a, &b]).is_err());
}

//! Central-difference checks of parameter gradients.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::index;

use super::ParamStore;
use crate::rng;
use crate::tensor::Tensor;
use crate::Result;

/// Gradient norms below this are treated as exactly zero; finite differences
/// cannot resolve them from rounding noise.
pub const ZERO_GRADIENT: f64 = 1e-8;

/// Agreement between analytic and numeric gradients on sampled entries of
/// one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` over the sampled
    /// entries; 0 when both norms are below [`ZERO_GRADIENT`].
    pub rel_error: f64,
}

/// Compares `analytic` (one tensor per parameter, store order) with
/// fourth-order central differences of `eval` at up to `per_tensor` entries of every tensor.
pub fn check_gradients(
    store: &ParamStore,
    analytic: &[Tensor],
    per_tensor: usize,
    h: f64,
    seed: u64,
    mut eval: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<Vec<TensorCheck>> {
    let mut out = Vec::with_capacity(store.len());
    let mut probe = store.clone();
    for (k, (name, t)) in store.iter().enumerate() {
        let n = t.len().min(per_tensor);
        let mut r = rng::stream(seed, &[k as u64]);
        let picks = index::sample(&mut r, t.len(), n);
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for i in picks {
            let x = t.data()[i];
            let mut at = |offset: f64| {
                probe.tensors_mut()[k].data_mut()[i] = x + offset;
                eval(&probe)
            };
            let numeric = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            probe.tensors_mut()[k].data_mut()[i] = x;
            let a = analytic[k].data()[i];
            diff += (a - numeric) * (a - numeric);
            na += a * a;
            nn += numeric * numeric;
        }
        let scale = libm::sqrt(na.max(nn));
        let rel_error = if scale < ZERO_GRADIENT { 0.0 } else { libm::sqrt(diff) / scale };
        out.push(TensorCheck {
            name: name.into(),
            entries: n,
            rel_error,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::from_vec(1, 3, alloc::vec![1.0, -2.0, 0.5]));
        let grad = Tensor::from_vec(1, 3, alloc::vec![2.0, -4.0, 1.0]);
        let eval = |s: &ParamStore| Ok(s.tensors()[0].data().iter().map(|v| v * v).sum());
        let checks = check_gradients(&store, &[grad], 3, 1e-4, 0, eval).unwrap();
        assert!(checks[0].rel_error < 1e-9);
        let wrong = Tensor::from_vec(1, 3, alloc::vec![2.0, 4.0, 1.0]);
        let checks = check_gradients(&store, &[wrong], 3, 1e-4, 0, eval).unwrap();
        assert!(checks[0].rel_error > 0.5);
    }
}

//! Central finite differences, used as an oracle for analytic gradients.

use crate::Tensor;

/// Central-difference derivative of `f` with respect to every element of
/// `point`, holding everything else fixed.
pub fn central_difference(point: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x);
            x[i] = orig - step;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest elementwise relative error, with magnitudes below `floor`
/// treated as `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Replaces the data of a leaf, keeping its shape and grad flag.
pub fn with_data(t: &Tensor, data: &[f64]) -> Tensor {
    let fresh = Tensor::from_slice(data, t.shape());
    if t.requires_grad() {
        fresh.requires_grad_leaf()
    } else {
        fresh
    }
}

//! Finite-difference utilities used by the layer tests and the acceptance
//! suite. These are generic numeric checks, independent of any analytic
//! backward implementation.

use crate::linalg::Matrix;

/// Scalar probe loss ⟨output, weights⟩ so that dLoss/dOutput equals the
/// fixed weight matrix.
pub fn weighted_sum_loss(output: &Matrix, weights: &Matrix) -> f64 {
    output.data().iter().zip(weights.data()).map(|(o, w)| o * w).sum()
}

/// Relative closeness in the usual gradient-check sense.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

pub fn expect_close(analytic: f64, numeric: f64, tol: f64, what: &str) {
    let err = relative_error(analytic, numeric);
    assert!(
        err < tol,
        "{what}: analytic {analytic} vs numeric {numeric} (rel err {err:.3e})"
    );
}

/// Central finite difference of a scalar function over one coordinate of a
/// parameter vector accessed through the closure.
pub fn central_difference(mut eval: impl FnMut(f64) -> f64, at: f64, h: f64) -> f64 {
    (eval(at + h) - eval(at - h)) / (2.0 * h)
}

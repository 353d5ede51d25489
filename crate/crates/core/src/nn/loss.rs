//! Mean absolute error. The subgradient at exact ties is 0.

use crate::linalg::Matrix;

/// MAE over all elements; gradient is sign(pred - target) / N.
pub fn mae_loss(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    assert_eq!((pred.rows(), pred.cols()), (target.rows(), target.cols()));
    let n = (pred.rows() * pred.cols()) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for (i, (p, t)) in pred.data().iter().zip(target.data()).enumerate() {
        let d = p - t;
        total += d.abs();
        grad.data_mut()[i] = if d == 0.0 { 0.0 } else { d.signum() / n };
    }
    (total / n, grad)
}

/// Two-head training loss: the unweighted sum of each output column's MAE.
/// Gradient per element is sign / batch.
pub fn two_head_mae(pred: &Matrix, target: &Matrix) -> (f64, Matrix) {
    assert_eq!(pred.cols(), 2, "two heads expected");
    assert_eq!((pred.rows(), pred.cols()), (target.rows(), target.cols()));
    let b = pred.rows() as f64;
    let mut grad = Matrix::zeros(pred.rows(), 2);
    let mut col_totals = [0.0f64; 2];
    for i in 0..pred.rows() {
        for j in 0..2 {
            let d = pred.at(i, j) - target.at(i, j);
            col_totals[j] += d.abs();
            grad.set(i, j, if d == 0.0 { 0.0 } else { d.signum() / b });
        }
    }
    (col_totals[0] / b + col_totals[1] / b, grad)
}

//! Inverted dropout: surviving units scale by 1/(1-rate) in training so
//! inference is the identity.

use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Dropout {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
        Dropout { rate }
    }

    /// Training-mode application. The returned mask holds the multiplier of
    /// each element (0 or 1/(1-rate)) for the backward pass.
    pub fn apply_train(&self, x: &Matrix, rng: &mut Rng) -> (Matrix, Matrix) {
        if self.rate == 0.0 {
            let mask = x.map(|_| 1.0);
            return (x.clone(), mask);
        }
        let keep_scale = 1.0 / (1.0 - self.rate);
        let mut mask = Matrix::zeros(x.rows(), x.cols());
        for m in mask.data_mut() {
            *m = if rng.next_f64() < self.rate { 0.0 } else { keep_scale };
        }
        (x.hadamard(&mask), mask)
    }

    pub fn backward(&self, mask: &Matrix, grad_out: &Matrix) -> Matrix {
        grad_out.hadamard(mask)
    }
}

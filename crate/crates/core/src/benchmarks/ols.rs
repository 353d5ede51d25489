//! Ordinary least squares on top of the Householder QR solver.

use thiserror::Error;

use crate::linalg::{qr_least_squares, LinalgError, Matrix};

#[derive(Debug, Error)]
pub enum OlsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// RSS / (n - p); NaN when there are no spare degrees of freedom.
    pub residual_variance: f64,
    pub n: usize,
    /// max|r_ii| / min|r_ii| of the triangular factor.
    pub condition: f64,
}

impl OlsFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.coefficients.len());
        x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

pub fn ols(x: &Matrix, y: &[f64]) -> Result<OlsFit, OlsError> {
    let sol = qr_least_squares(x, y)?;
    let n = x.rows();
    let p = x.cols();
    let rss: f64 = sol.residuals.iter().map(|r| r * r).sum();
    let dof = n as f64 - p as f64;
    Ok(OlsFit {
        coefficients: sol.coefficients,
        residual_variance: if dof > 0.0 { rss / dof } else { f64::NAN },
        n,
        condition: sol.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn exact_proportionality() {
        let x = Matrix::from_fn(6, 1, |i, _| (i + 1) as f64);
        let y: Vec<f64> = (0..6).map(|i| 2.0 * (i + 1) as f64).collect();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-20);
    }

    #[test]
    fn duplicated_column_errors() {
        let x = Matrix::from_fn(5, 2, |i, _| i as f64 + 1.0);
        let err = ols(&x, &[1.0; 5]).unwrap_err();
        assert!(matches!(err, OlsError::Linalg(LinalgError::RankDeficient { .. })));
    }

    #[test]
    fn scaling_y_scales_coefficients() {
        let mut rng = Rng::new(33);
        let x = Matrix::from_fn(40, 3, |_, _| rng.normal());
        let y: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
        let y10: Vec<f64> = y.iter().map(|v| 10.0 * v).collect();
        let a = ols(&x, &y).unwrap();
        let b = ols(&x, &y10).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((10.0 * ca - cb).abs() < 1e-9 * cb.abs().max(1.0));
        }
    }
}

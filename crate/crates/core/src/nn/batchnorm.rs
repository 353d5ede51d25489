//! Batch normalization over a B×F activation matrix. Training mode uses
//! batch statistics and maintains running estimates for inference.

use crate::linalg::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

pub struct BnCache {
    pub x_hat: Matrix,
    /// 1 / sqrt(batch_var + eps), per feature.
    pub std_inv: Vec<f64>,
}

pub struct BnGrads {
    pub d_gamma: Vec<f64>,
    pub d_beta: Vec<f64>,
    pub d_input: Matrix,
}

impl BatchNormLayer {
    pub fn new(features: usize) -> BatchNormLayer {
        BatchNormLayer {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn param_count(&self) -> usize {
        2 * self.gamma.len()
    }

    /// Training forward: normalize by batch statistics (population variance)
    /// and fold them into the running estimates.
    pub fn forward_train(&mut self, x: &Matrix) -> (Matrix, BnCache) {
        let (b, f) = (x.rows(), x.cols());
        assert_eq!(f, self.features());
        let bn = b as f64;

        let mut mean = vec![0.0; f];
        for i in 0..b {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= bn;
        }
        let mut var = vec![0.0; f];
        for i in 0..b {
            for j in 0..f {
                let d = x.at(i, j) - mean[j];
                var[j] += d * d;
            }
        }
        for v in &mut var {
            *v /= bn;
        }

        let std_inv: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut x_hat = Matrix::zeros(b, f);
        let mut y = Matrix::zeros(b, f);
        for i in 0..b {
            for j in 0..f {
                let xh = (x.at(i, j) - mean[j]) * std_inv[j];
                x_hat.set(i, j, xh);
                y.set(i, j, self.gamma[j] * xh + self.beta[j]);
            }
        }

        for j in 0..f {
            self.running_mean[j] = self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
            self.running_var[j] = self.momentum * self.running_var[j] + (1.0 - self.momentum) * var[j];
        }

        (y, BnCache { x_hat, std_inv })
    }

    /// Inference forward: normalize by the running estimates.
    pub fn forward_infer(&self, x: &Matrix) -> Matrix {
        let (b, f) = (x.rows(), x.cols());
        assert_eq!(f, self.features());
        let mut y = Matrix::zeros(b, f);
        for i in 0..b {
            for j in 0..f {
                let xh = (x.at(i, j) - self.running_mean[j])
                    / (self.running_var[j] + self.epsilon).sqrt();
                y.set(i, j, self.gamma[j] * xh + self.beta[j]);
            }
        }
        y
    }

    /// Backward through the training-mode normalization, including the
    /// dependence of the batch statistics on the input.
    pub fn backward(&self, cache: &BnCache, grad_out: &Matrix) -> BnGrads {
        let (b, f) = (grad_out.rows(), grad_out.cols());
        let bn = b as f64;
        let mut d_gamma = vec![0.0; f];
        let mut d_beta = vec![0.0; f];
        for i in 0..b {
            for j in 0..f {
                let g = grad_out.at(i, j);
                d_gamma[j] += g * cache.x_hat.at(i, j);
                d_beta[j] += g;
            }
        }

        // dx = std_inv/B * (B*dxhat - Σdxhat - xhat * Σ(dxhat ⊙ xhat))
        let mut sum_dxhat = vec![0.0; f];
        let mut sum_dxhat_xhat = vec![0.0; f];
        for i in 0..b {
            for j in 0..f {
                let dxh = grad_out.at(i, j) * self.gamma[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * cache.x_hat.at(i, j);
            }
        }
        let mut d_input = Matrix::zeros(b, f);
        for i in 0..b {
            for j in 0..f {
                let dxh = grad_out.at(i, j) * self.gamma[j];
                let dx = cache.std_inv[j] / bn
                    * (bn * dxh - sum_dxhat[j] - cache.x_hat.at(i, j) * sum_dxhat_xhat[j]);
                d_input.set(i, j, dx);
            }
        }

        BnGrads { d_gamma, d_beta, d_input }
    }
}

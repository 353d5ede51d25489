//! Fully connected layer, weights stored out×in.

use crate::linalg::Matrix;
use crate::rng::Rng;

use super::glorot_uniform;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

pub struct DenseGrads {
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
    pub d_input: Matrix,
}

impl DenseLayer {
    pub fn init(rng: &mut Rng, input: usize, output: usize) -> DenseLayer {
        DenseLayer {
            weight: glorot_uniform(rng, output, input, input, output),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// x: B×in → B×out.
    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul_transpose_b(&self.weight);
        out.add_row_vec(&self.bias);
        out
    }

    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> DenseGrads {
        DenseGrads {
            d_weight: grad_out.matmul_transpose_a(x),
            d_bias: grad_out.col_sums(),
            d_input: grad_out.matmul(&self.weight),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

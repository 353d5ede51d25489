//! Gated recurrent unit layer with batched forward and full
//! backpropagation through time.
//!
//! Gate equations, with the reset gate applied to the previous state inside
//! the candidate:
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
//! h̃_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ h̃_t
//! ```

use crate::linalg::Matrix;
use crate::rng::Rng;

use super::glorot_uniform;

#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

/// Everything the backward pass needs from a forward run. `hs` has T+1
/// entries, starting with h0.
pub struct GruCache {
    pub xs: Vec<Matrix>,
    pub hs: Vec<Matrix>,
    pub zs: Vec<Matrix>,
    pub rs: Vec<Matrix>,
    pub h_cands: Vec<Matrix>,
}

impl GruCache {
    /// Hidden state sequence h_1..h_T.
    pub fn outputs(&self) -> &[Matrix] {
        &self.hs[1..]
    }

    pub fn last_state(&self) -> &Matrix {
        self.hs.last().expect("cache has h0")
    }
}

pub struct GruGrads {
    pub d_w_z: Matrix,
    pub d_w_r: Matrix,
    pub d_w_h: Matrix,
    pub d_u_z: Matrix,
    pub d_u_r: Matrix,
    pub d_u_h: Matrix,
    pub d_b_z: Vec<f64>,
    pub d_b_r: Vec<f64>,
    pub d_b_h: Vec<f64>,
    pub d_inputs: Vec<Matrix>,
    pub d_h0: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GruLayer {
    pub fn init(rng: &mut Rng, input: usize, hidden: usize) -> GruLayer {
        let w = |rng: &mut Rng| glorot_uniform(rng, hidden, input, input, hidden);
        let u = |rng: &mut Rng| glorot_uniform(rng, hidden, hidden, hidden, hidden);
        GruLayer {
            w_z: w(rng),
            u_z: u(rng),
            w_r: w(rng),
            u_r: u(rng),
            w_h: w(rng),
            u_h: u(rng),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn param_count(&self) -> usize {
        3 * (self.hidden_dim() * self.input_dim() + self.hidden_dim() * self.hidden_dim() + self.hidden_dim())
    }

    /// Run the whole sequence. `sequence` holds T matrices of shape B×in;
    /// `h0` is B×hidden (zeros when absent).
    pub fn forward(&self, sequence: &[Matrix], h0: Option<&Matrix>) -> GruCache {
        let batch = sequence.first().map_or(0, Matrix::rows);
        let hidden = self.hidden_dim();
        let h0 = h0.cloned().unwrap_or_else(|| Matrix::zeros(batch, hidden));
        assert_eq!(h0.rows(), batch);
        assert_eq!(h0.cols(), hidden);

        let t_len = sequence.len();
        let mut hs = Vec::with_capacity(t_len + 1);
        hs.push(h0);
        let mut zs = Vec::with_capacity(t_len);
        let mut rs = Vec::with_capacity(t_len);
        let mut h_cands = Vec::with_capacity(t_len);

        for x_t in sequence {
            assert_eq!(x_t.cols(), self.input_dim(), "input width mismatch");
            let h_prev = hs.last().unwrap();

            let mut a_z = x_t.matmul_transpose_b(&self.w_z);
            a_z.add_assign(&h_prev.matmul_transpose_b(&self.u_z));
            a_z.add_row_vec(&self.b_z);
            let z = a_z.map(sigmoid);

            let mut a_r = x_t.matmul_transpose_b(&self.w_r);
            a_r.add_assign(&h_prev.matmul_transpose_b(&self.u_r));
            a_r.add_row_vec(&self.b_r);
            let r = a_r.map(sigmoid);

            let rh = r.hadamard(h_prev);
            let mut a_h = x_t.matmul_transpose_b(&self.w_h);
            a_h.add_assign(&rh.matmul_transpose_b(&self.u_h));
            a_h.add_row_vec(&self.b_h);
            let h_cand = a_h.map(f64::tanh);

            let mut h = Matrix::zeros(batch, hidden);
            for i in 0..batch * hidden {
                let zv = z.data()[i];
                h.data_mut()[i] =
                    (1.0 - zv) * h_prev.data()[i] + zv * h_cand.data()[i];
            }

            zs.push(z);
            rs.push(r);
            h_cands.push(h_cand);
            hs.push(h);
        }

        GruCache { xs: sequence.to_vec(), hs, zs, rs, h_cands }
    }

    /// Backpropagation through time. `grad_outputs` carries dLoss/dh_t for
    /// every step (zero matrices where unused).
    pub fn backward(&self, cache: &GruCache, grad_outputs: &[Matrix]) -> GruGrads {
        let t_len = cache.xs.len();
        assert_eq!(grad_outputs.len(), t_len);
        let hidden = self.hidden_dim();
        let input = self.input_dim();
        let batch = cache.hs[0].rows();

        let mut g = GruGrads {
            d_w_z: Matrix::zeros(hidden, input),
            d_w_r: Matrix::zeros(hidden, input),
            d_w_h: Matrix::zeros(hidden, input),
            d_u_z: Matrix::zeros(hidden, hidden),
            d_u_r: Matrix::zeros(hidden, hidden),
            d_u_h: Matrix::zeros(hidden, hidden),
            d_b_z: vec![0.0; hidden],
            d_b_r: vec![0.0; hidden],
            d_b_h: vec![0.0; hidden],
            d_inputs: vec![Matrix::zeros(batch, input); t_len],
            d_h0: Matrix::zeros(batch, hidden),
        };

        let mut dh_next = Matrix::zeros(batch, hidden);
        for t in (0..t_len).rev() {
            let x_t = &cache.xs[t];
            let h_prev = &cache.hs[t];
            let z = &cache.zs[t];
            let r = &cache.rs[t];
            let h_cand = &cache.h_cands[t];

            let mut dh = grad_outputs[t].clone();
            dh.add_assign(&dh_next);

            // h = (1-z)·h_prev + z·h_cand
            let mut d_a_h = Matrix::zeros(batch, hidden);
            let mut d_z_pre = Matrix::zeros(batch, hidden);
            let mut dh_prev = Matrix::zeros(batch, hidden);
            for i in 0..batch * hidden {
                let dhv = dh.data()[i];
                let zv = z.data()[i];
                let hc = h_cand.data()[i];
                let hp = h_prev.data()[i];
                // through the candidate and its tanh
                d_a_h.data_mut()[i] = dhv * zv * (1.0 - hc * hc);
                // through the update gate and its sigmoid
                d_z_pre.data_mut()[i] = dhv * (hc - hp) * zv * (1.0 - zv);
                // direct path to the previous state
                dh_prev.data_mut()[i] = dhv * (1.0 - zv);
            }

            let rh = r.hadamard(h_prev);
            g.d_w_h.add_assign(&d_a_h.matmul_transpose_a(x_t));
            g.d_u_h.add_assign(&d_a_h.matmul_transpose_a(&rh));
            for (b, v) in g.d_b_h.iter_mut().zip(d_a_h.col_sums()) {
                *b += v;
            }
            g.d_inputs[t].add_assign(&d_a_h.matmul(&self.w_h));
            let d_rh = d_a_h.matmul(&self.u_h);

            // split d(r ⊙ h_prev)
            let mut d_r_pre = Matrix::zeros(batch, hidden);
            for i in 0..batch * hidden {
                let drh = d_rh.data()[i];
                let rv = r.data()[i];
                let hp = h_prev.data()[i];
                d_r_pre.data_mut()[i] = drh * hp * rv * (1.0 - rv);
                dh_prev.data_mut()[i] += drh * rv;
            }

            g.d_w_z.add_assign(&d_z_pre.matmul_transpose_a(x_t));
            g.d_u_z.add_assign(&d_z_pre.matmul_transpose_a(h_prev));
            for (b, v) in g.d_b_z.iter_mut().zip(d_z_pre.col_sums()) {
                *b += v;
            }
            g.d_inputs[t].add_assign(&d_z_pre.matmul(&self.w_z));
            dh_prev.add_assign(&d_z_pre.matmul(&self.u_z));

            g.d_w_r.add_assign(&d_r_pre.matmul_transpose_a(x_t));
            g.d_u_r.add_assign(&d_r_pre.matmul_transpose_a(h_prev));
            for (b, v) in g.d_b_r.iter_mut().zip(d_r_pre.col_sums()) {
                *b += v;
            }
            g.d_inputs[t].add_assign(&d_r_pre.matmul(&self.w_r));
            dh_prev.add_assign(&d_r_pre.matmul(&self.u_r));

            dh_next = dh_prev;
        }
        g.d_h0 = dh_next;
        g
    }
}

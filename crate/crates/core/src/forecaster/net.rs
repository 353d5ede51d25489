//! The two-head forecasting network: a two-layer GRU over the accounting
//! sequence, merged with the market vector, followed by a dense stack.
//! Both heads are trained on standardized targets.

use crate::features::FeatureWindow;
use crate::linalg::Matrix;
use crate::nn::{
    tanh_backward, tanh_forward, BatchNormLayer, BnCache, DenseLayer, Dropout, GruCache, GruLayer,
};
use crate::rng::Rng;

/// Layer widths. Defaults follow the reference architecture; tests shrink
/// them for gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetDims {
    pub acc_input: usize,
    pub gru1_hidden: usize,
    pub gru2_hidden: usize,
    pub market: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub outputs: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        NetDims {
            acc_input: 6,
            gru1_hidden: 76,
            gru2_hidden: 38,
            market: 10,
            dense1: 19,
            dense2: 8,
            outputs: 2,
        }
    }
}

impl NetDims {
    pub fn merged(&self) -> usize {
        self.gru2_hidden + self.market
    }

    /// Closed-form trainable parameter count implied by the widths.
    pub fn expected_param_count(&self) -> usize {
        let gru = |input: usize, hidden: usize| 3 * (hidden * input + hidden * hidden + hidden);
        let dense = |input: usize, output: usize| output * input + output;
        let bn = |features: usize| 2 * features;
        gru(self.acc_input, self.gru1_hidden)
            + gru(self.gru1_hidden, self.gru2_hidden)
            + dense(self.merged(), self.dense1)
            + bn(self.dense1)
            + dense(self.dense1, self.dense2)
            + bn(self.dense2)
            + dense(self.dense2, self.outputs)
    }
}

#[derive(Clone, Debug)]
pub struct ForecastNet {
    pub dims: NetDims,
    pub gru1: GruLayer,
    pub gru2: GruLayer,
    pub dense1: DenseLayer,
    pub bn1: BatchNormLayer,
    pub dense2: DenseLayer,
    pub bn2: BatchNormLayer,
    pub head: DenseLayer,
}

/// Forward-pass cache for one training batch.
pub struct NetCache {
    seq_len: usize,
    gru1_cache: GruCache,
    gru1_masks: Vec<Matrix>,
    gru2_cache: GruCache,
    h2_mask: Matrix,
    merged: Matrix,
    bn1_cache: BnCache,
    t1: Matrix,
    mask1: Matrix,
    o1: Matrix,
    bn2_cache: BnCache,
    t2: Matrix,
    mask2: Matrix,
    o2: Matrix,
}

/// Gradients for every trainable tensor, in [`ForecastNet::param_shapes`]
/// order.
pub type NetGrads = Vec<Vec<f64>>;

impl ForecastNet {
    pub fn new(rng: &mut Rng) -> ForecastNet {
        Self::with_dims(NetDims::default(), rng)
    }

    pub fn with_dims(dims: NetDims, rng: &mut Rng) -> ForecastNet {
        ForecastNet {
            dims,
            gru1: GruLayer::init(rng, dims.acc_input, dims.gru1_hidden),
            gru2: GruLayer::init(rng, dims.gru1_hidden, dims.gru2_hidden),
            dense1: DenseLayer::init(rng, dims.merged(), dims.dense1),
            bn1: BatchNormLayer::new(dims.dense1),
            dense2: DenseLayer::init(rng, dims.dense1, dims.dense2),
            bn2: BatchNormLayer::new(dims.dense2),
            head: DenseLayer::init(rng, dims.dense2, dims.outputs),
        }
    }

    pub fn param_count(&self) -> usize {
        self.gru1.param_count()
            + self.gru2.param_count()
            + self.dense1.param_count()
            + self.bn1.param_count()
            + self.dense2.param_count()
            + self.bn2.param_count()
            + self.head.param_count()
    }

    /// Batch the windows into the GRU input sequence and the market matrix.
    pub fn batch_inputs(windows: &[&FeatureWindow]) -> (Vec<Matrix>, Matrix) {
        let b = windows.len();
        let t_len = windows.first().map_or(0, |w| w.acc.len());
        let acc_dim = windows.first().map_or(0, |w| w.acc[0].len());
        let mut seq = Vec::with_capacity(t_len);
        for t in 0..t_len {
            seq.push(Matrix::from_fn(b, acc_dim, |i, j| windows[i].acc[t][j]));
        }
        let market = Matrix::from_fn(b, windows[0].market.len(), |i, j| windows[i].market[j]);
        (seq, market)
    }

    /// Training forward: batch statistics, dropout, full cache. Updates the
    /// batchnorm running estimates.
    pub fn forward_train(
        &mut self,
        seq: &[Matrix],
        market: &Matrix,
        dropout: Dropout,
        rng: &mut Rng,
    ) -> (Matrix, NetCache) {
        let gru1_cache = self.gru1.forward(seq, None);
        let mut gru1_masks = Vec::with_capacity(seq.len());
        let mut gru2_input = Vec::with_capacity(seq.len());
        for h in gru1_cache.outputs() {
            let (dropped, mask) = dropout.apply_train(h, rng);
            gru1_masks.push(mask);
            gru2_input.push(dropped);
        }
        let gru2_cache = self.gru2.forward(&gru2_input, None);
        let (h2, h2_mask) = dropout.apply_train(gru2_cache.last_state(), rng);

        let merged = concat_cols(&h2, market);
        let a1 = self.dense1.forward(&merged);
        let (b1, bn1_cache) = self.bn1.forward_train(&a1);
        let t1 = tanh_forward(&b1);
        let (o1, mask1) = dropout.apply_train(&t1, rng);

        let a2 = self.dense2.forward(&o1);
        let (b2, bn2_cache) = self.bn2.forward_train(&a2);
        let t2 = tanh_forward(&b2);
        let (o2, mask2) = dropout.apply_train(&t2, rng);

        let out = self.head.forward(&o2);
        let cache = NetCache {
            seq_len: seq.len(),
            gru1_cache,
            gru1_masks,
            gru2_cache,
            h2_mask,
            merged,
            bn1_cache,
            t1,
            mask1,
            o1,
            bn2_cache,
            t2,
            mask2,
            o2,
        };
        (out, cache)
    }

    /// Deterministic inference forward: running statistics, no dropout.
    pub fn forward_infer(&self, seq: &[Matrix], market: &Matrix) -> Matrix {
        let gru1_cache = self.gru1.forward(seq, None);
        let gru2_cache = self.gru2.forward(gru1_cache.outputs(), None);
        let merged = concat_cols(gru2_cache.last_state(), market);
        let t1 = tanh_forward(&self.bn1.forward_infer(&self.dense1.forward(&merged)));
        let t2 = tanh_forward(&self.bn2.forward_infer(&self.dense2.forward(&t1)));
        self.head.forward(&t2)
    }

    /// Backward through the whole stack; `grad_out` is dLoss/dOutput (B×2).
    pub fn backward(&self, cache: &NetCache, grad_out: &Matrix) -> NetGrads {
        let head_grads = self.head.backward(&cache.o2, grad_out);

        let d_t2 = head_grads.d_input.hadamard(&cache.mask2);
        let d_b2 = tanh_backward(&cache.t2, &d_t2);
        let bn2_grads = self.bn2.backward(&cache.bn2_cache, &d_b2);
        let dense2_grads = self.dense2.backward(&cache.o1, &bn2_grads.d_input);

        let d_t1 = dense2_grads.d_input.hadamard(&cache.mask1);
        let d_b1 = tanh_backward(&cache.t1, &d_t1);
        let bn1_grads = self.bn1.backward(&cache.bn1_cache, &d_b1);
        let dense1_grads = self.dense1.backward(&cache.merged, &bn1_grads.d_input);

        let (d_h2_dropped, _d_market) =
            split_cols(&dense1_grads.d_input, self.dims.gru2_hidden, self.dims.market);
        let d_h2 = d_h2_dropped.hadamard(&cache.h2_mask);

        let batch = cache.merged.rows();
        let mut gru2_grad_outputs =
            vec![Matrix::zeros(batch, self.dims.gru2_hidden); cache.seq_len];
        *gru2_grad_outputs.last_mut().expect("nonzero seq") = d_h2;
        let gru2_grads = self.gru2.backward(&cache.gru2_cache, &gru2_grad_outputs);

        let gru1_grad_outputs: Vec<Matrix> = gru2_grads
            .d_inputs
            .iter()
            .zip(&cache.gru1_masks)
            .map(|(g, mask)| g.hadamard(mask))
            .collect();
        let gru1_grads = self.gru1.backward(&cache.gru1_cache, &gru1_grad_outputs);

        let mut out: NetGrads = Vec::with_capacity(23);
        for m in [
            &gru1_grads.d_w_z,
            &gru1_grads.d_w_r,
            &gru1_grads.d_w_h,
            &gru1_grads.d_u_z,
            &gru1_grads.d_u_r,
            &gru1_grads.d_u_h,
        ] {
            out.push(m.data().to_vec());
        }
        out.push(gru1_grads.d_b_z);
        out.push(gru1_grads.d_b_r);
        out.push(gru1_grads.d_b_h);
        for m in [
            &gru2_grads.d_w_z,
            &gru2_grads.d_w_r,
            &gru2_grads.d_w_h,
            &gru2_grads.d_u_z,
            &gru2_grads.d_u_r,
            &gru2_grads.d_u_h,
        ] {
            out.push(m.data().to_vec());
        }
        out.push(gru2_grads.d_b_z);
        out.push(gru2_grads.d_b_r);
        out.push(gru2_grads.d_b_h);
        out.push(dense1_grads.d_weight.data().to_vec());
        out.push(dense1_grads.d_bias);
        out.push(bn1_grads.d_gamma);
        out.push(bn1_grads.d_beta);
        out.push(dense2_grads.d_weight.data().to_vec());
        out.push(dense2_grads.d_bias);
        out.push(bn2_grads.d_gamma);
        out.push(bn2_grads.d_beta);
        out.push(head_grads.d_weight.data().to_vec());
        out.push(head_grads.d_bias);
        out
    }

    /// Trainable tensors as mutable slices, in the fixed crate-wide order.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(23);
        out.push(self.gru1.w_z.data_mut());
        out.push(self.gru1.w_r.data_mut());
        out.push(self.gru1.w_h.data_mut());
        out.push(self.gru1.u_z.data_mut());
        out.push(self.gru1.u_r.data_mut());
        out.push(self.gru1.u_h.data_mut());
        out.push(&mut self.gru1.b_z);
        out.push(&mut self.gru1.b_r);
        out.push(&mut self.gru1.b_h);
        out.push(self.gru2.w_z.data_mut());
        out.push(self.gru2.w_r.data_mut());
        out.push(self.gru2.w_h.data_mut());
        out.push(self.gru2.u_z.data_mut());
        out.push(self.gru2.u_r.data_mut());
        out.push(self.gru2.u_h.data_mut());
        out.push(&mut self.gru2.b_z);
        out.push(&mut self.gru2.b_r);
        out.push(&mut self.gru2.b_h);
        out.push(self.dense1.weight.data_mut());
        out.push(&mut self.dense1.bias);
        out.push(&mut self.bn1.gamma);
        out.push(&mut self.bn1.beta);
        out.push(self.dense2.weight.data_mut());
        out.push(&mut self.dense2.bias);
        out.push(&mut self.bn2.gamma);
        out.push(&mut self.bn2.beta);
        out.push(self.head.weight.data_mut());
        out.push(&mut self.head.bias);
        out
    }

    pub fn param_shapes(&mut self) -> Vec<usize> {
        self.param_slices_mut().iter().map(|s| s.len()).collect()
    }

    /// FNV-1a over the parameter bit patterns; stable fingerprint for
    /// reproducibility checks.
    pub fn param_checksum(&mut self) -> u64 {
        let mut hash = 0xcbf29ce484222325u64;
        for slice in self.param_slices_mut() {
            for v in slice.iter() {
                for byte in v.to_bits().to_le_bytes() {
                    hash ^= byte as u64;
                    hash = hash.wrapping_mul(0x100000001b3);
                }
            }
        }
        hash
    }
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows(), b.rows());
    Matrix::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a.at(i, j)
        } else {
            b.at(i, j - a.cols())
        }
    })
}

fn split_cols(m: &Matrix, left: usize, right: usize) -> (Matrix, Matrix) {
    assert_eq!(m.cols(), left + right);
    (
        Matrix::from_fn(m.rows(), left, |i, j| m.at(i, j)),
        Matrix::from_fn(m.rows(), right, |i, j| m.at(i, left + j)),
    )
}

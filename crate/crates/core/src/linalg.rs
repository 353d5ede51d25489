//! Row-major dense matrices and the Householder QR solver shared by the
//! neural layers, the benchmark regressions and the event study.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rank deficient design: dependent column(s) {columns:?}")]
    RankDeficient { columns: Vec<usize> },
    #[error("system is underdetermined: {rows} rows < {cols} columns")]
    Underdetermined { rows: usize, cols: usize },
}

/// Dense row-major f64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// C = self * other. ikj loop order keeps the inner loop contiguous.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// C = self * otherᵀ. Used for x·Wᵀ with weights stored out×in.
    pub fn matmul_transpose_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.cols,
            "matmul_transpose_b: {}x{} * ({}x{})ᵀ",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// C = selfᵀ * other. Used for accumulating weight gradients δᵀ·x.
    pub fn matmul_transpose_a(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, other.rows,
            "matmul_transpose_a: ({}x{})ᵀ * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Adds a row vector to every row.
    pub fn add_row_vec(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            for (x, b) in self.row_mut(i).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Column sums, e.g. bias gradients from a batch of per-row deltas.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        out
    }
}

/// Ordinary least squares via Householder QR.
///
/// Returns the coefficient vector minimizing ‖y − Xβ‖². Rank deficiency is
/// detected from the diagonal of R and reported with the offending column
/// indices. `condition` is max|r_ii| / min|r_ii|, a cheap conditioning proxy.
#[derive(Debug)]
pub struct QrSolution {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub condition: f64,
}

pub fn qr_least_squares(x: &Matrix, y: &[f64]) -> Result<QrSolution, LinalgError> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(LinalgError::ShapeMismatch(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    if n < p {
        return Err(LinalgError::Underdetermined { rows: n, cols: p });
    }

    // Work on an augmented copy [X | y]; Householder reflections applied to both.
    let mut a = x.clone();
    let mut b = y.to_vec();

    let mut r_diag = vec![0.0f64; p];
    for k in 0..p {
        // Householder vector for column k below the diagonal.
        let mut norm = 0.0;
        for i in k..n {
            norm += a.at(i, k) * a.at(i, k);
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            r_diag[k] = 0.0;
            continue;
        }
        let alpha = if a.at(k, k) >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = a.at(k, k) - alpha;
        for i in k + 1..n {
            v[i - k] = a.at(i, k);
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            for j in k..p {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i - k] * a.at(i, j);
                }
                let scale = 2.0 * dot / vtv;
                for i in k..n {
                    let val = a.at(i, j) - scale * v[i - k];
                    a.set(i, j, val);
                }
            }
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * b[i];
            }
            let scale = 2.0 * dot / vtv;
            for i in k..n {
                b[i] -= scale * v[i - k];
            }
        }
        r_diag[k] = a.at(k, k);
    }

    let max_diag = r_diag.iter().map(|d| d.abs()).fold(0.0f64, f64::max);
    let tol = max_diag * 1e-10;
    let dependent: Vec<usize> = r_diag
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() <= tol)
        .map(|(j, _)| j)
        .collect();
    if !dependent.is_empty() {
        return Err(LinalgError::RankDeficient { columns: dependent });
    }
    let min_diag = r_diag.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);

    // Back substitution on the upper triangle.
    let mut beta = vec![0.0f64; p];
    for k in (0..p).rev() {
        let mut acc = b[k];
        for j in k + 1..p {
            acc -= a.at(k, j) * beta[j];
        }
        beta[k] = acc / a.at(k, k);
    }

    let mut residuals = y.to_vec();
    for i in 0..n {
        let mut fit = 0.0;
        for j in 0..p {
            fit += x.at(i, j) * beta[j];
        }
        residuals[i] -= fit;
    }

    Ok(QrSolution {
        coefficients: beta,
        residuals,
        condition: max_diag / min_diag,
    })
}

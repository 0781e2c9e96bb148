//! Dense row-major matrices over `f64` with the handful of operations the
//! model needs. Shape contracts are programming errors and panic with both
//! shapes in the message; anything driven by user input is validated before
//! it reaches this layer.

use std::fmt;

/// Dense `rows x cols` matrix, row-major `Vec<f64>` storage.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)?;
        if self.rows * self.cols <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive, got {rows}x{cols}");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        m.data.fill(value);
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} does not match shape {rows}x{cols}",
            data.len()
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows: no rows");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "from_rows: ragged row lengths {} vs {cols}", r.len());
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    /// Identity of the given order.
    pub fn eye(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row index {i} out of range for {} rows", self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        assert!(i < self.rows, "row index {i} out of range for {} rows", self.rows);
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn assert_finite(&self, context: &str) {
        assert!(self.is_finite(), "non-finite value in {context} ({}x{})", self.rows, self.cols);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "elementwise op on mismatched shapes {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Standard matrix product. Panics on inner-dimension mismatch, naming both shapes.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Matrix { rows: m, cols: n, data: out }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul_elem(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `[self || other]` along columns.
    pub fn concat_cols(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, other.rows,
            "concat_cols row mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Matrix { rows: self.rows, cols, data }
    }

    /// Columns `[start, start+len)` as a new matrix.
    pub fn slice_cols(&self, start: usize, len: usize) -> Matrix {
        assert!(
            start + len <= self.cols,
            "slice_cols [{start}, {}) out of range for {} cols",
            start + len,
            self.cols
        );
        let mut data = Vec::with_capacity(self.rows * len);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..start + len]);
        }
        Matrix { rows: self.rows, cols: len, data }
    }

    pub fn relu(&self) -> Matrix {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    /// Elementwise `x if x >= 0 else slope * x`. The slope is a model
    /// hyperparameter validated at config time; here it only needs to be finite.
    pub fn leaky_relu(&self, slope: f64) -> Matrix {
        assert!(slope.is_finite(), "leaky_relu slope must be finite");
        self.map(|v| if v >= 0.0 { v } else { slope * v })
    }

    pub fn sigmoid(&self) -> Matrix {
        self.map(sigmoid_scalar)
    }

    /// Row-wise softmax with max-subtraction for stability. Every row of the
    /// result sums to 1.
    pub fn softmax_rows(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            softmax_slice(out.row_mut(i));
        }
        out
    }

    /// Row-wise softmax restricted to positions where `mask` is nonzero.
    /// Masked positions get exactly 0; a fully masked row is all-zero.
    pub fn masked_softmax_rows(&self, mask: &Matrix) -> Matrix {
        assert_eq!(
            self.shape(),
            mask.shape(),
            "masked_softmax shape mismatch: {}x{} vs mask {}x{}",
            self.rows,
            self.cols,
            mask.rows,
            mask.cols
        );
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let mut max = f64::NEG_INFINITY;
            for j in 0..self.cols {
                if mask.get(i, j) != 0.0 {
                    max = max.max(self.get(i, j));
                }
            }
            if max == f64::NEG_INFINITY {
                continue; // empty row stays zero
            }
            let mut sum = 0.0;
            for j in 0..self.cols {
                if mask.get(i, j) != 0.0 {
                    let e = (self.get(i, j) - max).exp();
                    out.set(i, j, e);
                    sum += e;
                }
            }
            for j in 0..self.cols {
                if mask.get(i, j) != 0.0 {
                    out.set(i, j, out.get(i, j) / sum);
                }
            }
        }
        out
    }

    /// 1 x cols matrix of column means. Errors are impossible by construction
    /// (matrices always have at least one row); kept as a panic guard.
    pub fn mean_rows(&self) -> Matrix {
        assert!(self.rows > 0, "mean_rows on empty matrix");
        let mut out = Matrix::zeros(1, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j] += self.get(i, j);
            }
        }
        let inv = 1.0 / self.rows as f64;
        for v in &mut out.data {
            *v *= inv;
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Cosine similarity `(u.v) / (|u| |v|)`, clamped to `[-1, 1]`.
///
/// A zero-norm input (padding rows produce zero embeddings) yields 0 with a
/// logged warning instead of an error so that training never aborts on
/// degenerate rows.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "cosine_similarity length mismatch: {} vs {}", u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        log::warn!("cosine_similarity on zero-norm vector; returning 0");
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_passthrough() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ]);
        assert_eq!(Matrix::eye(3).matmul(&m), m);
    }

    #[test]
    fn matmul_hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert_eq!(a.matmul(&b), Matrix::from_rows(&[vec![2.0], vec![4.0]]));
    }

    #[test]
    fn matmul_zero_factor() {
        let m = Matrix::filled(3, 2, 1.5);
        assert_eq!(Matrix::zeros(2, 3).matmul(&m), Matrix::zeros(2, 2));
    }

    #[test]
    #[should_panic(expected = "matmul dimension mismatch: 2x3 * 2x2")]
    fn matmul_shape_mismatch_names_both_shapes() {
        let _ = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 2));
    }

    #[test]
    fn softmax_symmetry_cases() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0]]).softmax_rows();
        assert_eq!(m.row(0), &[0.5, 0.5]);
        let m = Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).softmax_rows();
        for &v in m.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_large_inputs_do_not_overflow() {
        let m = Matrix::from_rows(&[vec![1000.0, 1000.0]]).softmax_rows();
        assert!(m.is_finite());
        assert_eq!(m.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn leaky_relu_cases() {
        let m = Matrix::from_rows(&[vec![2.0, -1.0, 0.0]]).leaky_relu(0.2);
        assert_eq!(m.row(0), &[2.0, -0.2, 0.0]);
    }

    #[test]
    fn sigmoid_cases() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!(sigmoid_scalar(30.0) >= 1.0 - 1e-12);
        // antisymmetry
        for x in [-3.25, -0.5, 0.75, 8.0] {
            assert!((sigmoid_scalar(-x) - (1.0 - sigmoid_scalar(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_rows_cases() {
        let m = Matrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 5.0]]);
        assert_eq!(m.mean_rows(), Matrix::from_rows(&[vec![2.0, 4.0]]));
        let single = Matrix::from_rows(&[vec![7.0, -2.0]]);
        assert_eq!(single.mean_rows(), single);
        assert_eq!(Matrix::zeros(4, 3).mean_rows(), Matrix::zeros(1, 3));
    }

    #[test]
    fn cosine_basic_cases() {
        assert!((cosine_similarity(&[2.0, -1.0, 0.5], &[2.0, -1.0, 0.5]) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]) - 0.7071).abs() < 1e-4);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn masked_softmax_empty_row_is_zero() {
        let x = Matrix::from_rows(&[vec![5.0, 1.0], vec![2.0, 3.0]]);
        let mask = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let y = x.masked_softmax_rows(&mask);
        assert_eq!(y.row(0), &[0.0, 0.0]);
        assert!((y.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]);
        let c = a.concat_cols(&b);
        assert_eq!(c.slice_cols(0, 2), a);
        assert_eq!(c.slice_cols(2, 1), b);
    }
}

//! Reverse-mode differentiation over an explicitly recorded operation graph.
//!
//! The graph is an arena rebuilt per forward pass: every operation appends a
//! node holding its value, a zero-initialized gradient of the same shape, and
//! the recipe linking it to its parents. [`Tape::backward`] walks the arena
//! once in reverse construction order, which is a reverse topological order
//! because operations can only reference nodes created before them.
//!
//! A tape is confined to one thread from forward through backward; the
//! resulting value/grad matrices can be moved out and shared afterwards.

use super::matrix::Matrix;

/// Handle to a node in a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    ConcatCols(Var, Var),
    SliceCols { src: Var, start: usize, len: usize },
    /// `out[i][j] = a[i][0] + b[j][0]` for column vectors `a`, `b`.
    AddOuter(Var, Var),
    /// Matrix plus a 1 x cols row vector broadcast over rows.
    AddRowVec(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    SoftmaxRows(Var),
    MaskedSoftmaxRows(Var),
    MeanRows(Var),
    SumAll(Var),
    LayerNorm { src: Var, gamma: Var, beta: Var, eps: f64 },
    EmbedRows { table: Var, ids: Vec<usize> },
    /// Weighted negative log softmax probability of `label`, in stable
    /// log-sum-exp form. Output is 1x1.
    CrossEntropy { logits: Var, label: usize, weight: f64 },
}

/// Recorded differentiation graph.
pub struct Tape {
    values: Vec<Matrix>,
    grads: Vec<Matrix>,
    ops: Vec<Op>,
    requires: Vec<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { values: Vec::new(), grads: Vec::new(), ops: Vec::new(), requires: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value entering tape");
        let id = self.values.len();
        self.grads.push(Matrix::zeros(value.rows(), value.cols()));
        self.values.push(value);
        self.ops.push(op);
        self.requires.push(requires);
        Var(id)
    }

    fn requires_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires[v.0])
    }

    /// Leaf that participates in differentiation (model parameter).
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation (input data, masks, constants).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.values[v.0]
    }

    pub fn grad(&self, v: Var) -> &Matrix {
        &self.grads[v.0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0].matmul(&self.values[b.0]);
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::MatMul(a, b), req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0].add(&self.values[b.0]);
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::Add(a, b), req)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0].sub(&self.values[b.0]);
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::Sub(a, b), req)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0].mul_elem(&self.values[b.0]);
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::MulElem(a, b), req)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.values[a.0].scale(s);
        let req = self.requires[a.0];
        self.push(value, Op::Scale(a, s), req)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.values[a.0].transpose();
        let req = self.requires[a.0];
        self.push(value, Op::Transpose(a), req)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let value = self.values[a.0].concat_cols(&self.values[b.0]);
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::ConcatCols(a, b), req)
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Var {
        let value = self.values[src.0].slice_cols(start, len);
        let req = self.requires[src.0];
        self.push(value, Op::SliceCols { src, start, len }, req)
    }

    /// `out[i][j] = a[i] + b[j]` for column vectors `a` (n x 1) and `b` (m x 1).
    pub fn add_outer(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(av.cols(), 1, "add_outer expects column vectors, got {}x{}", av.rows(), av.cols());
        assert_eq!(bv.cols(), 1, "add_outer expects column vectors, got {}x{}", bv.rows(), bv.cols());
        let mut value = Matrix::zeros(av.rows(), bv.rows());
        for i in 0..av.rows() {
            for j in 0..bv.rows() {
                value.set(i, j, av.get(i, 0) + bv.get(j, 0));
            }
        }
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::AddOuter(a, b), req)
    }

    pub fn add_row_vec(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(bv.rows(), 1, "add_row_vec bias must be 1x{}, got {}x{}", av.cols(), bv.rows(), bv.cols());
        assert_eq!(av.cols(), bv.cols(), "add_row_vec width mismatch: {} vs {}", av.cols(), bv.cols());
        let mut value = av.clone();
        for i in 0..value.rows() {
            for j in 0..value.cols() {
                value.set(i, j, value.get(i, j) + bv.get(0, j));
            }
        }
        let req = self.requires_any(&[a, b]);
        self.push(value, Op::AddRowVec(a, b), req)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.values[a.0].relu();
        let req = self.requires[a.0];
        self.push(value, Op::Relu(a), req)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.values[a.0].leaky_relu(slope);
        let req = self.requires[a.0];
        self.push(value, Op::LeakyRelu(a, slope), req)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.values[a.0].sigmoid();
        let req = self.requires[a.0];
        self.push(value, Op::Sigmoid(a), req)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = self.values[a.0].softmax_rows();
        let req = self.requires[a.0];
        self.push(value, Op::SoftmaxRows(a), req)
    }

    /// Softmax restricted to positions where `mask` is nonzero; fully masked
    /// rows yield zero rows. The mask is data, not a differentiated input.
    pub fn masked_softmax_rows(&mut self, src: Var, mask: Matrix) -> Var {
        let value = self.values[src.0].masked_softmax_rows(&mask);
        let req = self.requires[src.0];
        self.push(value, Op::MaskedSoftmaxRows(src), req)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let value = self.values[a.0].mean_rows();
        let req = self.requires[a.0];
        self.push(value, Op::MeanRows(a), req)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.values[a.0].sum()]);
        let req = self.requires[a.0];
        self.push(value, Op::SumAll(a), req)
    }

    /// Row-wise layer normalization with learned 1 x cols `gamma` and `beta`.
    pub fn layer_norm(&mut self, src: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let x = &self.values[src.0];
        let g = &self.values[gamma.0];
        let b = &self.values[beta.0];
        assert_eq!(g.shape(), (1, x.cols()), "layer_norm gamma must be 1x{}", x.cols());
        assert_eq!(b.shape(), (1, x.cols()), "layer_norm beta must be 1x{}", x.cols());
        let mut value = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let (mean, inv_std) = row_moments(x.row(i), eps);
            for j in 0..x.cols() {
                let xhat = (x.get(i, j) - mean) * inv_std;
                value.set(i, j, g.get(0, j) * xhat + b.get(0, j));
            }
        }
        let req = self.requires_any(&[src, gamma, beta]);
        self.push(value, Op::LayerNorm { src, gamma, beta, eps }, req)
    }

    /// Gather rows of `table` by index (embedding lookup).
    pub fn embed_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = &self.values[table.0];
        assert!(!ids.is_empty(), "embed_rows with empty id list");
        let mut value = Matrix::zeros(ids.len(), t.cols());
        for (i, &id) in ids.iter().enumerate() {
            assert!(id < t.rows(), "embedding id {id} out of range for table with {} rows", t.rows());
            value.row_mut(i).copy_from_slice(t.row(id));
        }
        let req = self.requires[table.0];
        self.push(value, Op::EmbedRows { table, ids: ids.to_vec() }, req)
    }

    /// `weight * (logsumexp(logits) - logits[label])` as a 1x1 node.
    pub fn cross_entropy(&mut self, logits: Var, label: usize, weight: f64) -> Var {
        let l = &self.values[logits.0];
        assert_eq!(l.rows(), 1, "cross_entropy expects 1xC logits, got {}x{}", l.rows(), l.cols());
        assert!(label < l.cols(), "label {label} out of range for {} classes", l.cols());
        let row = l.row(0);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let value = Matrix::from_vec(1, 1, vec![weight * (lse - row[label])]);
        let req = self.requires[logits.0];
        self.push(value, Op::CrossEntropy { logits, label, weight }, req)
    }

    /// Accumulate `d(output)/d(node)` into every node that requires grad.
    /// `output` must be scalar (1x1); panics otherwise.
    pub fn backward(&mut self, output: Var) {
        let shape = self.values[output.0].shape();
        assert_eq!(shape, (1, 1), "backward requires a scalar (1x1) output, got {}x{}", shape.0, shape.1);
        self.grads[output.0].set(0, 0, 1.0);
        for idx in (0..self.values.len()).rev() {
            if !self.requires[idx] {
                continue;
            }
            if self.grads[idx].max_abs() == 0.0 {
                continue;
            }
            let upstream = self.grads[idx].clone();
            self.propagate(idx, &upstream);
        }
    }

    fn add_grad(&mut self, v: Var, delta: &Matrix) {
        if !self.requires[v.0] {
            return;
        }
        let g = &mut self.grads[v.0];
        debug_assert_eq!(g.shape(), delta.shape());
        for (gi, di) in g.data_mut().iter_mut().zip(delta.data()) {
            *gi += di;
        }
    }

    fn propagate(&mut self, idx: usize, up: &Matrix) {
        // Ops are cloned out so parent values can be read while grads mutate.
        let op = self.ops[idx].clone();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = up.matmul(&self.values[b.0].transpose());
                let db = self.values[a.0].transpose().matmul(up);
                self.add_grad(a, &da);
                self.add_grad(b, &db);
            }
            Op::Add(a, b) => {
                self.add_grad(a, up);
                self.add_grad(b, up);
            }
            Op::Sub(a, b) => {
                self.add_grad(a, up);
                let neg = up.scale(-1.0);
                self.add_grad(b, &neg);
            }
            Op::MulElem(a, b) => {
                let da = up.mul_elem(&self.values[b.0]);
                let db = up.mul_elem(&self.values[a.0]);
                self.add_grad(a, &da);
                self.add_grad(b, &db);
            }
            Op::Scale(a, s) => {
                let da = up.scale(s);
                self.add_grad(a, &da);
            }
            Op::Transpose(a) => {
                let da = up.transpose();
                self.add_grad(a, &da);
            }
            Op::ConcatCols(a, b) => {
                let ac = self.values[a.0].cols();
                let bc = self.values[b.0].cols();
                self.add_grad(a, &up.slice_cols(0, ac));
                self.add_grad(b, &up.slice_cols(ac, bc));
            }
            Op::SliceCols { src, start, len } => {
                let mut da = Matrix::zeros(self.values[src.0].rows(), self.values[src.0].cols());
                for i in 0..up.rows() {
                    for j in 0..len {
                        da.set(i, start + j, up.get(i, j));
                    }
                }
                self.add_grad(src, &da);
            }
            Op::AddOuter(a, b) => {
                let mut da = Matrix::zeros(self.values[a.0].rows(), 1);
                let mut db = Matrix::zeros(self.values[b.0].rows(), 1);
                for i in 0..up.rows() {
                    for j in 0..up.cols() {
                        da.set(i, 0, da.get(i, 0) + up.get(i, j));
                        db.set(j, 0, db.get(j, 0) + up.get(i, j));
                    }
                }
                self.add_grad(a, &da);
                self.add_grad(b, &db);
            }
            Op::AddRowVec(a, b) => {
                self.add_grad(a, up);
                let mut db = Matrix::zeros(1, up.cols());
                for i in 0..up.rows() {
                    for j in 0..up.cols() {
                        db.set(0, j, db.get(0, j) + up.get(i, j));
                    }
                }
                self.add_grad(b, &db);
            }
            Op::Relu(a) => {
                let da = up.zip_map(&self.values[a.0], |g, x| if x > 0.0 { g } else { 0.0 });
                self.add_grad(a, &da);
            }
            Op::LeakyRelu(a, slope) => {
                let da = up.zip_map(&self.values[a.0], |g, x| if x >= 0.0 { g } else { slope * g });
                self.add_grad(a, &da);
            }
            Op::Sigmoid(a) => {
                let y = &self.values[idx];
                let da = up.zip_map(y, |g, s| g * s * (1.0 - s));
                self.add_grad(a, &da);
            }
            // dx = y .* (dy - rowsum(dy .* y)); zero rows (fully masked) stay
            // zero because y is zero there, so one formula serves both ops.
            Op::SoftmaxRows(a) | Op::MaskedSoftmaxRows(a) => {
                let y = &self.values[idx];
                let mut da = Matrix::zeros(up.rows(), up.cols());
                for i in 0..up.rows() {
                    let dot: f64 =
                        up.row(i).iter().zip(y.row(i)).map(|(&g, &p)| g * p).sum();
                    for j in 0..up.cols() {
                        da.set(i, j, y.get(i, j) * (up.get(i, j) - dot));
                    }
                }
                self.add_grad(a, &da);
            }
            Op::MeanRows(a) => {
                let rows = self.values[a.0].rows();
                let inv = 1.0 / rows as f64;
                let mut da = Matrix::zeros(rows, up.cols());
                for i in 0..rows {
                    for j in 0..up.cols() {
                        da.set(i, j, up.get(0, j) * inv);
                    }
                }
                self.add_grad(a, &da);
            }
            Op::SumAll(a) => {
                let g = up.get(0, 0);
                let da = Matrix::filled(self.values[a.0].rows(), self.values[a.0].cols(), g);
                self.add_grad(a, &da);
            }
            Op::LayerNorm { src, gamma, beta, eps } => {
                let x = &self.values[src.0];
                let g = &self.values[gamma.0];
                let cols = x.cols();
                let mut dx = Matrix::zeros(x.rows(), cols);
                let mut dgamma = Matrix::zeros(1, cols);
                let mut dbeta = Matrix::zeros(1, cols);
                for i in 0..x.rows() {
                    let (mean, inv_std) = row_moments(x.row(i), eps);
                    let xhat: Vec<f64> =
                        x.row(i).iter().map(|&v| (v - mean) * inv_std).collect();
                    let dxhat: Vec<f64> = (0..cols)
                        .map(|j| up.get(i, j) * g.get(0, j))
                        .collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / cols as f64;
                    let mean_dxhat_xhat =
                        dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<f64>() / cols as f64;
                    for j in 0..cols {
                        dgamma.set(0, j, dgamma.get(0, j) + up.get(i, j) * xhat[j]);
                        dbeta.set(0, j, dbeta.get(0, j) + up.get(i, j));
                        dx.set(i, j, inv_std * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat));
                    }
                }
                self.add_grad(src, &dx);
                self.add_grad(gamma, &dgamma);
                self.add_grad(beta, &dbeta);
            }
            Op::EmbedRows { table, ids } => {
                let t = &self.values[table.0];
                let mut dt = Matrix::zeros(t.rows(), t.cols());
                for (i, &id) in ids.iter().enumerate() {
                    for j in 0..t.cols() {
                        dt.set(id, j, dt.get(id, j) + up.get(i, j));
                    }
                }
                self.add_grad(table, &dt);
            }
            Op::CrossEntropy { logits, label, weight } => {
                let probs = self.values[logits.0].softmax_rows();
                let g = up.get(0, 0) * weight;
                let mut dl = Matrix::zeros(1, probs.cols());
                for j in 0..probs.cols() {
                    let delta = if j == label { 1.0 } else { 0.0 };
                    dl.set(0, j, g * (probs.get(0, j) - delta));
                }
                self.add_grad(logits, &dl);
            }
        }
    }
}

fn row_moments(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::gradcheck::finite_diff_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data)
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]));
        let s = t.sum_all(w);
        t.backward(s);
        assert_eq!(t.grad(w), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn grad_of_sum_of_squares_is_two_w() {
        let mut t = Tape::new();
        let value = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let w = t.param(value.clone());
        let sq = t.mul_elem(w, w);
        let s = t.sum_all(sq);
        t.backward(s);
        assert_eq!(t.grad(w), &value.scale(2.0));
    }

    #[test]
    #[should_panic(expected = "backward requires a scalar")]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let w = t.param(Matrix::zeros(2, 2));
        t.backward(w);
    }

    #[test]
    fn cross_entropy_matches_uniform_closed_form() {
        let mut t = Tape::new();
        let logits = t.param(Matrix::from_rows(&[vec![0.3, 0.3, 0.3]]));
        let loss = t.cross_entropy(logits, 1, 1.0);
        assert!((t.value(loss).get(0, 0) - 3.0f64.ln()).abs() < 1e-12);
    }

    /// One composite expression touching every op, gradient-checked against
    /// central finite differences over 20 seeds.
    #[test]
    fn composite_of_all_ops_matches_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = vec![
                ("table".to_string(), rand_matrix(&mut rng, 6, 4)),
                ("w1".to_string(), rand_matrix(&mut rng, 4, 4)),
                ("bias".to_string(), rand_matrix(&mut rng, 1, 4)),
                ("gamma".to_string(), rand_matrix(&mut rng, 1, 4).map(|v| 1.0 + 0.3 * v)),
                ("beta".to_string(), rand_matrix(&mut rng, 1, 4)),
                ("a1".to_string(), rand_matrix(&mut rng, 4, 1)),
                ("a2".to_string(), rand_matrix(&mut rng, 4, 1)),
                ("w2".to_string(), rand_matrix(&mut rng, 4, 3)),
            ];
            let mut mask = Matrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    if i == j || rng.random_bool(0.6) {
                        mask.set(i, j, 1.0);
                    }
                }
            }

            let eval = |p: &[(String, Matrix)], tape_out: Option<&mut Vec<Matrix>>| -> f64 {
                let mut t = Tape::new();
                let table = t.param(p[0].1.clone());
                let w1 = t.param(p[1].1.clone());
                let bias = t.param(p[2].1.clone());
                let gamma = t.param(p[3].1.clone());
                let beta = t.param(p[4].1.clone());
                let a1 = t.param(p[5].1.clone());
                let a2 = t.param(p[6].1.clone());
                let w2 = t.param(p[7].1.clone());

                let x0 = t.embed_rows(table, &[0, 2, 4, 1]);
                let x1 = t.matmul(x0, w1);
                let x2 = t.add_row_vec(x1, bias);
                let x3 = t.layer_norm(x2, gamma, beta, 1e-5);
                let f1 = t.matmul(x3, a1);
                let f2 = t.matmul(x3, a2);
                let scores = t.add_outer(f1, f2);
                let scores = t.leaky_relu(scores, 0.2);
                let alpha = t.masked_softmax_rows(scores, mask.clone());
                let agg = t.matmul(alpha, x3);
                let agg = t.relu(agg);
                let sig = t.sigmoid(x3);
                let cat = t.concat_cols(agg, sig);
                let mid = t.slice_cols(cat, 2, 4);
                let soft = t.softmax_rows(mid);
                let prod = t.mul_elem(mid, soft);
                let pooled = t.mean_rows(prod);
                let logits = t.matmul(pooled, w2);
                let ce = t.cross_entropy(logits, 1, 1.3);
                let tr = t.transpose(x3);
                let trs = t.sum_all(tr);
                let extra0 = t.scale(trs, 0.01);
                let diff = t.sub(ce, extra0);
                let total = t.add(diff, extra0); // exercise add/sub pair
                let loss = t.value(total).get(0, 0);
                if let Some(out) = tape_out {
                    t.backward(total);
                    for v in [table, w1, bias, gamma, beta, a1, a2, w2] {
                        out.push(t.grad(v).clone());
                    }
                }
                loss
            };

            let mut analytic = Vec::new();
            eval(&params, Some(&mut analytic));
            let report =
                finite_diff_check(&params, &analytic, |p| eval(p, None), 1e-6);
            assert!(
                report.max_rel_error < 1e-5,
                "seed {seed}: max rel error {} at {}",
                report.max_rel_error,
                report.worst_param()
            );
        }
    }

    #[test]
    fn backward_accumulates_through_shared_nodes() {
        // loss = sum(w * w) + sum(w): grad = 2w + 1
        let mut t = Tape::new();
        let value = Matrix::from_rows(&[vec![0.5, -1.5]]);
        let w = t.param(value.clone());
        let sq = t.mul_elem(w, w);
        let s1 = t.sum_all(sq);
        let s2 = t.sum_all(w);
        let total = t.add(s1, s2);
        t.backward(total);
        assert_eq!(t.grad(w), &value.scale(2.0).add(&Matrix::filled(1, 2, 1.0)));
    }
}

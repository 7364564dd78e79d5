use std::sync::Arc;

use super::{Aggregation, Tensor, TensorError};
use crate::sparse::CsrMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const NO_ARGMAX: usize = usize::MAX;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM {
        mat: Arc<CsrMatrix>,
        rhs: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    MulConst(Var, Arc<Tensor>),
    MulColumn(Var, Var),
    RowSum(Var),
    SumAll(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    RowSoftmax(Var),
    ElementwiseMax {
        inputs: Vec<Var>,
        argmax: Vec<usize>,
    },
    EdgeAggregate {
        pattern: Arc<CsrMatrix>,
        coef: Var,
        z: Var,
        agg: Aggregation,
        argmax: Vec<usize>,
    },
    EdgeBilinear {
        pattern: Arc<CsrMatrix>,
        left: Var,
        right: Var,
    },
    EdgeSoftmax {
        pattern: Arc<CsrMatrix>,
        scores: Var,
    },
    PairInner {
        emb: Var,
        pairs: Arc<Vec<(usize, usize)>>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Arc<Vec<(usize, usize)>>,
        probs: Tensor,
    },
    NllOfProbs {
        probs: Var,
        targets: Arc<Vec<(usize, usize)>>,
    },
    BceWithLogits {
        logits: Var,
        targets: Arc<Vec<f64>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so gradients can be pulled back through it.
///
/// Nodes are appended in execution order, so the node list is already a
/// topological order and backward is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    /// Trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to `v`. Values that
    /// the loss does not depend on get a zero gradient.
    pub fn grad(&self, v: Var) -> Tensor {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            _ => {
                let (r, c) = self.nodes[v.0].value.shape();
                Tensor::zeros(r, c)
            }
        }
    }

    fn push_raw(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_raw(value, op, requires_grad))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// Sparse constant times dense variable.
    pub fn spmm(&mut self, mat: &Arc<CsrMatrix>, rhs: Var) -> Result<Var, TensorError> {
        let x = self.value(rhs);
        if mat.ncols() != x.rows() {
            return Err(TensorError::Shape {
                op: "spmm",
                left: (mat.nrows(), mat.ncols()),
                right: x.shape(),
            });
        }
        let d = x.cols();
        let mut out = Tensor::zeros(mat.nrows(), d);
        for i in 0..mat.nrows() {
            let row = out.row_mut(i);
            for (j, a) in mat.row(i) {
                for (o, &xv) in row.iter_mut().zip(x.row(j)) {
                    *o += a * xv;
                }
            }
        }
        self.push(
            "spmm",
            out,
            Op::SpMM {
                mat: Arc::clone(mat),
                rhs,
            },
            &[rhs],
        )
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::new(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("add", a, b, |p, q| p + q)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("sub", a, b, |p, q| p - q)?;
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.zip_same("mul", a, b, |p, q| p * q)?;
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Arc<Tensor>) -> Result<Var, TensorError> {
        let x = self.value(a);
        if x.shape() != c.shape() {
            return Err(shape_err("mul_const", x, &c));
        }
        let data = x.data().iter().zip(c.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.rows(), x.cols(), data)?;
        self.push("mul_const", out, Op::MulConst(a, c), &[a])
    }

    /// Adds a `1 x d` bias row to every row of an `n x d` matrix.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row_bias", x, b));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        self.push("add_row_bias", out, Op::AddRowBias(a, bias), &[a, bias])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let x = self.value(a);
        let out = Tensor::new(x.rows(), x.cols(), x.data().iter().map(|v| v * c).collect())?;
        self.push("scale", out, Op::Scale(a, c), &[a])
    }

    /// Scales row `i` of an `n x d` matrix by entry `i` of an `n x 1` column.
    pub fn mul_column(&mut self, a: Var, s: Var) -> Result<Var, TensorError> {
        let (x, c) = (self.value(a), self.value(s));
        if c.cols() != 1 || c.rows() != x.rows() {
            return Err(shape_err("mul_column", x, c));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            let f = c.get(r, 0);
            out.row_mut(r).iter_mut().for_each(|o| *o *= f);
        }
        self.push("mul_column", out, Op::MulColumn(a, s), &[a, s])
    }

    /// Sum of each row, as an `n x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|r| x.row(r).iter().sum()).collect();
        let out = Tensor::new(x.rows(), 1, data)?;
        self.push("row_sum", out, Op::RowSum(a), &[a])
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var, TensorError> {
        let s = self.value(a).data().iter().sum();
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let tensors: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_cols(&tensors)?;
        self.push("concat", out, Op::Concat(parts.to_vec()), parts)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(TensorError::Shape {
                op: "slice_cols",
                left: x.shape(),
                right: (start, len),
            });
        }
        let out = x.slice_cols(start, len);
        self.push("slice_cols", out, Op::SliceCols(a, start), &[a])
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var, TensorError> {
        let x = self.value(a);
        let out = Tensor::new(x.rows(), x.cols(), x.data().iter().map(|&v| f(v)).collect())?;
        self.push(name, out, op, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.map("relu", a, Op::Relu(a), |v| v.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        self.map("sigmoid", a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.map("tanh", a, Op::Tanh(a), f64::tanh)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = row_softmax(self.value(a));
        self.push("row_softmax", out, Op::RowSoftmax(a), &[a])
    }

    /// Elementwise maximum over same-shape inputs; ties go to the earliest input.
    pub fn elementwise_max(&mut self, inputs: &[Var]) -> Result<Var, TensorError> {
        let first = inputs
            .first()
            .ok_or_else(|| TensorError::Invalid("elementwise_max of nothing".into()))?;
        let mut out = self.value(*first).clone();
        let mut argmax = vec![0usize; out.data().len()];
        for (k, &v) in inputs.iter().enumerate().skip(1) {
            let x = self.value(v);
            if x.shape() != out.shape() {
                return Err(shape_err("elementwise_max", &out, x));
            }
            for (idx, (o, &xv)) in out.data_mut().iter_mut().zip(x.data()).enumerate() {
                if xv > *o {
                    *o = xv;
                    argmax[idx] = k;
                }
            }
        }
        self.push(
            "elementwise_max",
            out,
            Op::ElementwiseMax {
                inputs: inputs.to_vec(),
                argmax,
            },
            inputs,
        )
    }

    /// Message aggregation over the stored entries of `pattern`.
    ///
    /// Row `v` of the output aggregates `coef[e] * z[col(e)]` over the entries
    /// `e` of row `v`; `coef` is a `1 x nnz` row aligned with the pattern's
    /// entries. Rows without entries produce zeros. Max ties keep the entry with
    /// the lowest column index.
    pub fn edge_aggregate(
        &mut self,
        pattern: &Arc<CsrMatrix>,
        coef: Var,
        z: Var,
        agg: Aggregation,
    ) -> Result<Var, TensorError> {
        let (c, x) = (self.value(coef), self.value(z));
        if c.rows() != 1 || c.cols() != pattern.nnz() {
            return Err(TensorError::Shape {
                op: "edge_aggregate",
                left: (1, pattern.nnz()),
                right: c.shape(),
            });
        }
        if pattern.ncols() != x.rows() {
            return Err(TensorError::Shape {
                op: "edge_aggregate",
                left: (pattern.nrows(), pattern.ncols()),
                right: x.shape(),
            });
        }
        let d = x.cols();
        let mut out = Tensor::zeros(pattern.nrows(), d);
        let mut argmax = Vec::new();
        if agg == Aggregation::Max {
            argmax = vec![NO_ARGMAX; pattern.nrows() * d];
        }
        let rp = pattern.row_ptr();
        let cols = pattern.col_idx();
        for v in 0..pattern.nrows() {
            let span = rp[v]..rp[v + 1];
            if span.is_empty() {
                continue;
            }
            let row = out.row_mut(v);
            match agg {
                Aggregation::Sum | Aggregation::Mean => {
                    for e in span.clone() {
                        let w = c.data()[e];
                        for (o, &xv) in row.iter_mut().zip(x.row(cols[e])) {
                            *o += w * xv;
                        }
                    }
                    if agg == Aggregation::Mean {
                        let n = span.len() as f64;
                        row.iter_mut().for_each(|o| *o /= n);
                    }
                }
                Aggregation::Max => {
                    for dim in 0..d {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_e = NO_ARGMAX;
                        for e in span.clone() {
                            let m = c.data()[e] * x.get(cols[e], dim);
                            if m > best {
                                best = m;
                                best_e = e;
                            }
                        }
                        row[dim] = best;
                        argmax[v * d + dim] = best_e;
                    }
                }
            }
        }
        self.push(
            "edge_aggregate",
            out,
            Op::EdgeAggregate {
                pattern: Arc::clone(pattern),
                coef,
                z,
                agg,
                argmax,
            },
            &[coef, z],
        )
    }

    /// Per-entry score `left[row(e)] . right[col(e)]`, as a `1 x nnz` row.
    pub fn edge_bilinear(&mut self, pattern: &Arc<CsrMatrix>, left: Var, right: Var) -> Result<Var, TensorError> {
        let (l, r) = (self.value(left), self.value(right));
        if l.cols() != r.cols() || l.rows() != pattern.nrows() || r.rows() != pattern.ncols() {
            return Err(shape_err("edge_bilinear", l, r));
        }
        let rows = pattern.row_of_entries();
        let data = rows
            .iter()
            .zip(pattern.col_idx())
            .map(|(&i, &j)| l.row(i).iter().zip(r.row(j)).map(|(a, b)| a * b).sum())
            .collect();
        let out = Tensor::new(1, pattern.nnz(), data)?;
        self.push(
            "edge_bilinear",
            out,
            Op::EdgeBilinear {
                pattern: Arc::clone(pattern),
                left,
                right,
            },
            &[left, right],
        )
    }

    /// Softmax of per-entry scores within each row of `pattern`.
    pub fn edge_softmax(&mut self, pattern: &Arc<CsrMatrix>, scores: Var) -> Result<Var, TensorError> {
        let s = self.value(scores);
        if s.rows() != 1 || s.cols() != pattern.nnz() {
            return Err(TensorError::Shape {
                op: "edge_softmax",
                left: (1, pattern.nnz()),
                right: s.shape(),
            });
        }
        let mut out = vec![0.0; pattern.nnz()];
        let rp = pattern.row_ptr();
        for v in 0..pattern.nrows() {
            let span = rp[v]..rp[v + 1];
            if span.is_empty() {
                continue;
            }
            let m = s.data()[span.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for e in span.clone() {
                out[e] = (s.data()[e] - m).exp();
                total += out[e];
            }
            for e in span {
                out[e] /= total;
            }
        }
        let out = Tensor::new(1, pattern.nnz(), out)?;
        self.push(
            "edge_softmax",
            out,
            Op::EdgeSoftmax {
                pattern: Arc::clone(pattern),
                scores,
            },
            &[scores],
        )
    }

    /// Inner products `emb[u] . emb[v]` for each pair, as a `p x 1` column.
    pub fn pair_inner(&mut self, emb: Var, pairs: Arc<Vec<(usize, usize)>>) -> Result<Var, TensorError> {
        let e = self.value(emb);
        if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u >= e.rows() || v >= e.rows()) {
            return Err(TensorError::Invalid(format!(
                "pair ({u}, {v}) out of range for {} embeddings",
                e.rows()
            )));
        }
        let data = pairs
            .iter()
            .map(|&(u, v)| e.row(u).iter().zip(e.row(v)).map(|(a, b)| a * b).sum())
            .collect();
        let out = Tensor::new(pairs.len(), 1, data)?;
        self.push("pair_inner", out, Op::PairInner { emb, pairs }, &[emb])
    }

    /// Summed cross-entropy of `softmax(logits)` against `(row, class)` targets.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Arc<Vec<(usize, usize)>>) -> Result<Var, TensorError> {
        let x = self.value(logits);
        check_targets(x, &targets)?;
        let probs = row_softmax(x);
        let mut loss = 0.0;
        for &(r, c) in targets.iter() {
            let row = x.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[c];
        }
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            },
            &[logits],
        )
    }

    /// `-sum log probs[row, class]` over the targets.
    pub fn nll_of_probs(&mut self, probs: Var, targets: Arc<Vec<(usize, usize)>>) -> Result<Var, TensorError> {
        let p = self.value(probs);
        check_targets(p, &targets)?;
        let loss: f64 = targets.iter().map(|&(r, c)| -p.get(r, c).ln()).sum();
        self.push(
            "nll_of_probs",
            Tensor::scalar(loss),
            Op::NllOfProbs { probs, targets },
            &[probs],
        )
    }

    /// Summed binary cross-entropy of `sigmoid(logits)` against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Arc<Vec<f64>>) -> Result<Var, TensorError> {
        let x = self.value(logits);
        if x.cols() != 1 || x.rows() != targets.len() {
            return Err(TensorError::Shape {
                op: "bce_with_logits",
                left: x.shape(),
                right: (targets.len(), 1),
            });
        }
        let loss = x
            .data()
            .iter()
            .zip(targets.iter())
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum();
        self.push(
            "bce_with_logits",
            Tensor::scalar(loss),
            Op::BceWithLogits { logits, targets },
            &[logits],
        )
    }

    /// Reverse sweep from a scalar loss. Replaces gradients from earlier calls.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        let (r, c) = self.value(loss).shape();
        if (r, c) != (1, 1) {
            return Err(TensorError::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.backprop_node(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    accumulate(grads, *a, g.matmul(&bv.transpose()).expect("shape checked"));
                }
                if self.needs(*b) {
                    accumulate(grads, *b, av.transpose().matmul(g).expect("shape checked"));
                }
            }
            Op::SpMM { mat, rhs } => {
                let d = g.cols();
                let mut dx = Tensor::zeros(mat.ncols(), d);
                for r in 0..mat.nrows() {
                    let grow = g.row(r);
                    for (j, a) in mat.row(r) {
                        for (o, &gv) in dx.row_mut(j).iter_mut().zip(grow) {
                            *o += a * gv;
                        }
                    }
                }
                accumulate(grads, *rhs, dx);
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        accumulate(grads, v, g.clone());
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    accumulate(grads, *b, scaled(g, -1.0));
                }
            }
            Op::AddRowBias(a, bias) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*bias) {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &gv) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *o += gv;
                        }
                    }
                    accumulate(grads, *bias, db);
                }
            }
            Op::Scale(a, c) => accumulate(grads, *a, scaled(g, *c)),
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    accumulate(grads, *a, hadamard(g, bv));
                }
                if self.needs(*b) {
                    accumulate(grads, *b, hadamard(g, av));
                }
            }
            Op::MulConst(a, c) => accumulate(grads, *a, hadamard(g, c)),
            Op::MulColumn(a, s) => {
                let (av, sv) = (self.value(*a), self.value(*s));
                if self.needs(*a) {
                    let mut da = g.clone();
                    for r in 0..da.rows() {
                        let f = sv.get(r, 0);
                        da.row_mut(r).iter_mut().for_each(|o| *o *= f);
                    }
                    accumulate(grads, *a, da);
                }
                if self.needs(*s) {
                    let data = (0..g.rows())
                        .map(|r| g.row(r).iter().zip(av.row(r)).map(|(p, q)| p * q).sum())
                        .collect();
                    accumulate(grads, *s, Tensor::new(g.rows(), 1, data).expect("column"));
                }
            }
            Op::RowSum(a) => {
                let (rows, cols) = self.value(*a).shape();
                let mut da = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let gv = g.get(r, 0);
                    da.row_mut(r).iter_mut().for_each(|o| *o = gv);
                }
                accumulate(grads, *a, da);
            }
            Op::SumAll(a) => {
                let (rows, cols) = self.value(*a).shape();
                accumulate(grads, *a, Tensor::filled(rows, cols, g.get(0, 0)));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.needs(p) {
                        accumulate(grads, p, g.slice_cols(offset, w));
                    }
                    offset += w;
                }
            }
            Op::SliceCols(a, start) => {
                let (rows, cols) = self.value(*a).shape();
                let mut da = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    da.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(grads, *a, da);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), data).expect("shape"));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let data = g.data().iter().zip(y.data()).map(|(&gv, &yv)| gv * yv * (1.0 - yv)).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), data).expect("shape"));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let data = g.data().iter().zip(y.data()).map(|(&gv, &yv)| gv * (1.0 - yv * yv)).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), data).expect("shape"));
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut da = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(p, q)| p * q).sum();
                    for ((o, &gv), &yv) in da.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                        *o = yv * (gv - dot);
                    }
                }
                accumulate(grads, *a, da);
            }
            Op::ElementwiseMax { inputs, argmax } => {
                for (k, &v) in inputs.iter().enumerate() {
                    if !self.needs(v) {
                        continue;
                    }
                    let data = g
                        .data()
                        .iter()
                        .zip(argmax)
                        .map(|(&gv, &am)| if am == k { gv } else { 0.0 })
                        .collect();
                    accumulate(grads, v, Tensor::new(g.rows(), g.cols(), data).expect("shape"));
                }
            }
            Op::EdgeAggregate {
                pattern,
                coef,
                z,
                agg,
                argmax,
            } => self.backprop_edge_aggregate(pattern, *coef, *z, *agg, argmax, g, grads),
            Op::EdgeBilinear { pattern, left, right } => {
                let (l, r) = (self.value(*left), self.value(*right));
                let mut dl = Tensor::zeros(l.rows(), l.cols());
                let mut dr = Tensor::zeros(r.rows(), r.cols());
                let rows = pattern.row_of_entries();
                for (e, (&i, &j)) in rows.iter().zip(pattern.col_idx()).enumerate() {
                    let ge = g.data()[e];
                    if ge == 0.0 {
                        continue;
                    }
                    for (o, &rv) in dl.row_mut(i).iter_mut().zip(r.row(j)) {
                        *o += ge * rv;
                    }
                    for (o, &lv) in dr.row_mut(j).iter_mut().zip(l.row(i)) {
                        *o += ge * lv;
                    }
                }
                if self.needs(*left) {
                    accumulate(grads, *left, dl);
                }
                if self.needs(*right) {
                    accumulate(grads, *right, dr);
                }
            }
            Op::EdgeSoftmax { pattern, scores } => {
                let y = node.value.data();
                let mut ds = vec![0.0; y.len()];
                let rp = pattern.row_ptr();
                for v in 0..pattern.nrows() {
                    let span = rp[v]..rp[v + 1];
                    let dot: f64 = span.clone().map(|e| g.data()[e] * y[e]).sum();
                    for e in span {
                        ds[e] = y[e] * (g.data()[e] - dot);
                    }
                }
                accumulate(grads, *scores, Tensor::new(1, y.len(), ds).expect("row"));
            }
            Op::PairInner { emb, pairs } => {
                let e = self.value(*emb);
                let mut de = Tensor::zeros(e.rows(), e.cols());
                for (p, &(u, v)) in pairs.iter().enumerate() {
                    let gp = g.get(p, 0);
                    for c in 0..e.cols() {
                        let (eu, ev) = (e.get(u, c), e.get(v, c));
                        de.row_mut(u)[c] += gp * ev;
                        de.row_mut(v)[c] += gp * eu;
                    }
                }
                accumulate(grads, *emb, de);
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                let scale = g.get(0, 0);
                let mut dx = Tensor::zeros(probs.rows(), probs.cols());
                for &(r, c) in targets.iter() {
                    for (o, &p) in dx.row_mut(r).iter_mut().zip(probs.row(r)) {
                        *o += scale * p;
                    }
                    dx.row_mut(r)[c] -= scale;
                }
                accumulate(grads, *logits, dx);
            }
            Op::NllOfProbs { probs, targets } => {
                let p = self.value(*probs);
                let scale = g.get(0, 0);
                let mut dp = Tensor::zeros(p.rows(), p.cols());
                for &(r, c) in targets.iter() {
                    dp.row_mut(r)[c] -= scale / p.get(r, c);
                }
                accumulate(grads, *probs, dp);
            }
            Op::BceWithLogits { logits, targets } => {
                let x = self.value(*logits);
                let scale = g.get(0, 0);
                let data = x
                    .data()
                    .iter()
                    .zip(targets.iter())
                    .map(|(&z, &t)| scale * (sigmoid(z) - t))
                    .collect();
                accumulate(grads, *logits, Tensor::new(x.rows(), 1, data).expect("column"));
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn backprop_edge_aggregate(
        &self,
        pattern: &CsrMatrix,
        coef: Var,
        z: Var,
        agg: Aggregation,
        argmax: &[usize],
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let (c, x) = (self.value(coef), self.value(z));
        let d = x.cols();
        let mut dz = Tensor::zeros(x.rows(), d);
        let mut dc = vec![0.0; pattern.nnz()];
        let rp = pattern.row_ptr();
        let cols = pattern.col_idx();
        for v in 0..pattern.nrows() {
            let span = rp[v]..rp[v + 1];
            if span.is_empty() {
                continue;
            }
            let grow = g.row(v);
            match agg {
                Aggregation::Sum | Aggregation::Mean => {
                    let norm = if agg == Aggregation::Mean {
                        1.0 / span.len() as f64
                    } else {
                        1.0
                    };
                    for e in span {
                        let w = c.data()[e] * norm;
                        let xr = x.row(cols[e]);
                        dc[e] += norm * grow.iter().zip(xr).map(|(p, q)| p * q).sum::<f64>();
                        for (o, &gv) in dz.row_mut(cols[e]).iter_mut().zip(grow) {
                            *o += w * gv;
                        }
                    }
                }
                Aggregation::Max => {
                    for (dim, &gv) in grow.iter().enumerate() {
                        let e = argmax[v * d + dim];
                        if e == NO_ARGMAX {
                            continue;
                        }
                        dz.row_mut(cols[e])[dim] += c.data()[e] * gv;
                        dc[e] += gv * x.get(cols[e], dim);
                    }
                }
            }
        }
        if self.needs(z) {
            accumulate(grads, z, dz);
        }
        if self.needs(coef) {
            accumulate(grads, coef, Tensor::new(1, dc.len(), dc).expect("row"));
        }
    }
}

fn check_targets(x: &Tensor, targets: &[(usize, usize)]) -> Result<(), TensorError> {
    match targets.iter().find(|&&(r, c)| r >= x.rows() || c >= x.cols()) {
        Some(&(r, c)) => Err(TensorError::Invalid(format!(
            "target ({r}, {c}) outside {}x{} predictions",
            x.rows(),
            x.cols()
        ))),
        None => Ok(()),
    }
}

fn scaled(t: &Tensor, c: f64) -> Tensor {
    Tensor::new(t.rows(), t.cols(), t.data().iter().map(|v| v * c).collect()).expect("shape")
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::new(a.rows(), a.cols(), a.data().iter().zip(b.data()).map(|(p, q)| p * q).collect()).expect("shape")
}

/// Numerically stable softmax of each row.
fn row_softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::row_vector(vec![1.0, 2.0, 3.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum_all(sq).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.value(loss).get(0, 0), 14.0);
        assert_eq!(tape.grad(x).data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn unrelated_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let p = tape.param(Tensor::row_vector(vec![5.0, 6.0]));
        let loss = tape.mul(x, x).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(p).data(), &[0.0, 0.0]);
    }

    #[test]
    fn relu_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row_vector(vec![-1.0, 0.0, 2.0]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::row_vector(vec![1.0, 2.0]));
        assert_eq!(
            tape.backward(x).unwrap_err(),
            TensorError::NonScalarLoss { rows: 1, cols: 2 }
        );
    }

    #[test]
    fn non_finite_results_are_errors() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(f64::MAX));
        assert_eq!(
            tape.scale(x, 10.0).unwrap_err(),
            TensorError::NonFinite { op: "scale" }
        );
    }

    #[test]
    fn concat_gradient_splits_by_block() {
        let mut tape = Tape::new();
        let a = tape.param(t(&[vec![1.0, 2.0]]));
        let b = tape.param(t(&[vec![3.0]]));
        let c = tape.concat(&[a, b]).unwrap();
        let w = tape.constant(t(&[vec![10.0, 20.0, 30.0]]));
        let prod = tape.mul(c, w).unwrap();
        let loss = tape.sum_all(prod).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(a).data(), &[10.0, 20.0]);
        assert_eq!(tape.grad(b).data(), &[30.0]);
    }

    #[test]
    fn sum_aggregation_sends_same_gradient_to_every_contributor() {
        let pattern = Arc::new(CsrMatrix::from_sorted_triplets(
            1,
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)],
        ));
        let mut tape = Tape::new();
        let coef = tape.constant(Tensor::row_vector(vec![1.0; 3]));
        let z = tape.param(t(&[vec![1.0], vec![5.0], vec![3.0]]));
        let h = tape.edge_aggregate(&pattern, coef, z, Aggregation::Sum).unwrap();
        let loss = tape.sum_all(h).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(z).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn max_aggregation_routes_to_lowest_index_argmax() {
        let pattern = Arc::new(CsrMatrix::from_sorted_triplets(
            1,
            3,
            &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)],
        ));
        let mut tape = Tape::new();
        let coef = tape.constant(Tensor::row_vector(vec![1.0; 3]));
        let z = tape.param(t(&[vec![2.0], vec![5.0], vec![5.0]]));
        let h = tape.edge_aggregate(&pattern, coef, z, Aggregation::Max).unwrap();
        assert_eq!(tape.value(h).data(), &[5.0]);
        let loss = tape.sum_all(h).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(z).data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn mean_aggregation_is_sum_over_count() {
        let pattern = Arc::new(CsrMatrix::from_sorted_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]));
        let mut tape = Tape::new();
        let coef = tape.constant(Tensor::row_vector(vec![2.0, 1.0]));
        let z = tape.constant(t(&[vec![1.0], vec![4.0]]));
        let s = tape.edge_aggregate(&pattern, coef, z, Aggregation::Sum).unwrap();
        let m = tape.edge_aggregate(&pattern, coef, z, Aggregation::Mean).unwrap();
        assert_eq!(tape.value(s).data(), &[6.0, 0.0]);
        assert_eq!(tape.value(m).data(), &[3.0, 0.0]);
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(1, 2));
        let p = tape.row_softmax(x).unwrap();
        assert_eq!(tape.value(p).data(), &[0.5, 0.5]);
    }
}

use std::sync::Arc;

use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Point-wise activation applied by [`Tape::activation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Hadamard(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Affine(Var, f64),
    Activation(Var, ActivationKind),
    Concat(Vec<Var>, usize),
    Slice {
        src: Var,
        axis: usize,
        start: usize,
        end: usize,
    },
    Reshape(Var),
    SumAll(Var),
    Gather {
        table: Var,
        rows: Vec<usize>,
    },
    Softmax(Var),
    WeightedBce {
        logits: Var,
        labels: Vec<f64>,
        pos_weight: f64,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Hadamard(..) => "hadamard",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::AddRow(..) => "add_row",
            Op::MulCol(..) => "mul_col",
            Op::Affine(..) => "affine",
            Op::Activation(..) => "activation",
            Op::Concat(..) => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape(..) => "reshape",
            Op::SumAll(..) => "reduce_sum",
            Op::Gather { .. } => "gather",
            Op::Softmax(..) => "softmax",
            Op::WeightedBce { .. } => "weighted_bce",
        }
    }

    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Hadamard(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b) => vec![*a, *b],
            Op::Affine(a, _) | Op::Activation(a, _) | Op::Reshape(a) | Op::SumAll(a) | Op::Softmax(a) => vec![*a],
            Op::Concat(parts, _) => parts.clone(),
            Op::Slice { src, .. } => vec![*src],
            Op::Gather { table, .. } => vec![*table],
            Op::WeightedBce { logits, .. } => vec![*logits],
        }
    }
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
}

/// Append-only record of a forward computation.
///
/// Node ids are assigned in insertion order, and every op only refers to
/// nodes that already exist, so the node list is always topologically
/// sorted and [`Tape::backward`] is a single reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<(usize, &'static str)>,
}

/// Gradients of a scalar root with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `var` does not influence the root.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &Shape {
        self.nodes[var.0].value.shape()
    }

    pub fn parents(&self, var: Var) -> Vec<Var> {
        self.nodes[var.0].op.parents()
    }

    /// First node whose forward value contained NaN or infinity, with the
    /// name of the op that produced it. Only tracked in debug builds.
    pub fn non_finite(&self) -> Option<(Var, &'static str)> {
        self.first_non_finite.map(|(id, op)| (Var(id), op))
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.push_shared(Arc::new(value), op)
    }

    fn push_shared(&mut self, value: Arc<Tensor>, op: Op) -> Var {
        let id = self.nodes.len();
        if cfg!(debug_assertions) && self.first_non_finite.is_none() && !value.is_finite() {
            self.first_non_finite = Some((id, op.name()));
        }
        self.nodes.push(Node { value, op });
        Var(id)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a leaf without copying; the tensor stays shared with the caller.
    pub fn leaf_shared(&mut self, value: Arc<Tensor>) -> Var {
        self.push_shared(value, Op::Leaf)
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Dimension {
            op,
            lhs: self.shape(a).clone(),
            rhs: self.shape(b).clone(),
        }
    }

    fn matrix_dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v).dims() {
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::InvalidShape(format!(
                "{op} expects a matrix, got {}",
                self.shape(v)
            ))),
        }
    }

    /// Matrix product of `[p x q]` and `[q x r]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (p, q) = self.matrix_dims("matmul", a)?;
        let (q2, r) = self.matrix_dims("matmul", b)?;
        if q != q2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; p * r];
        gemm(
            p,
            q,
            r,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
        );
        Ok(self.push(Tensor::from_parts(Shape(vec![p, r]), out), Op::MatMul(a, b)))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(op, a, b));
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Ok(Tensor::from_parts(ta.shape().clone(), data))
    }

    /// Element-wise (Hadamard) product of equally shaped nodes.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("hadamard", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Hadamard(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Adds the vector `row` (length n) to every row of `a` (last axis n).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let n = match self.shape(row).dims() {
            [n] => *n,
            _ => return Err(self.mismatch("add_row", a, row)),
        };
        let (_, cols) = self.value(a).as_matrix_dims();
        if self.shape(a).rank() == 0 || cols != n {
            return Err(self.mismatch("add_row", a, row));
        }
        let r = self.value(row).data();
        let ta = self.value(a);
        let data = ta
            .data()
            .chunks_exact(n)
            .flat_map(|chunk| chunk.iter().zip(r).map(|(x, y)| x + y))
            .collect();
        let t = Tensor::from_parts(ta.shape().clone(), data);
        Ok(self.push(t, Op::AddRow(a, row)))
    }

    /// Scales each row of `a: [B x n]` by the matching entry of `col: [B x 1]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (rows, cols) = self.matrix_dims("mul_col", a)?;
        if self.shape(col).dims() != [rows, 1] {
            return Err(self.mismatch("mul_col", a, col));
        }
        let s = self.value(col).data();
        let data = self
            .value(a)
            .data()
            .chunks_exact(cols)
            .zip(s)
            .flat_map(|(chunk, k)| chunk.iter().map(move |x| x * k))
            .collect();
        let t = Tensor::from_parts(Shape(vec![rows, cols]), data);
        Ok(self.push(t, Op::MulCol(a, col)))
    }

    /// `alpha * a + beta`, element-wise.
    pub fn affine(&mut self, a: Var, alpha: f64, beta: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| alpha * x + beta).collect();
        let t = Tensor::from_parts(ta.shape().clone(), data);
        self.push(t, Op::Affine(a, alpha))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        self.affine(a, alpha, 0.0)
    }

    pub fn activation(&mut self, a: Var, kind: ActivationKind) -> Var {
        if kind == ActivationKind::Identity {
            return a;
        }
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| kind.apply(x)).collect();
        let t = Tensor::from_parts(ta.shape().clone(), data);
        self.push(t, Op::Activation(a, kind))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, ActivationKind::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, ActivationKind::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, ActivationKind::Relu)
    }

    /// Concatenates along `axis`; every other extent must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero parts".into()))?;
        let base = self.shape(first).dims().to_vec();
        if axis >= base.len() {
            return Err(Error::InvalidShape(format!(
                "concat axis {axis} out of range for {}",
                self.shape(first)
            )));
        }
        let mut total = 0;
        for &p in parts {
            let d = self.shape(p).dims();
            let compatible =
                d.len() == base.len() && d.iter().zip(&base).enumerate().all(|(k, (x, y))| k == axis || x == y);
            if !compatible {
                return Err(self.mismatch("concat", first, p));
            }
            total += d[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let chunk = self.shape(p).dims()[axis] * inner;
                data.extend_from_slice(&self.value(p).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut dims = base;
        dims[axis] = total;
        let t = Tensor::from_parts(Shape(dims), data);
        Ok(self.push(t, Op::Concat(parts.to_vec(), axis)))
    }

    /// Half-open range `start..end` along `axis`.
    pub fn slice(&mut self, src: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let dims = self.shape(src).dims().to_vec();
        if axis >= dims.len() || start >= end || end > dims[axis] {
            return Err(Error::InvalidShape(format!(
                "slice {start}..{end} on axis {axis} out of bounds for {}",
                self.shape(src)
            )));
        }
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let src_data = self.value(src).data();
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * dims[axis] * inner;
            data.extend_from_slice(&src_data[base + start * inner..base + end * inner]);
        }
        let mut out_dims = dims;
        out_dims[axis] = end - start;
        let t = Tensor::from_parts(Shape(out_dims), data);
        Ok(self.push(t, Op::Slice { src, axis, start, end }))
    }

    pub fn reshape(&mut self, src: Var, dims: impl Into<Vec<usize>>) -> Result<Var> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.value(src).numel() {
            return Err(Error::InvalidShape(format!(
                "cannot reshape {} into {shape}",
                self.shape(src)
            )));
        }
        let t = self.value(src).clone().reshaped(shape);
        Ok(self.push(t, Op::Reshape(src)))
    }

    /// Sum of all elements, as a scalar node.
    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    /// Picks `rows` out of a `[V x D]` table, giving `[rows.len() x D]`.
    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        let (v, d) = self.matrix_dims("gather_rows", table)?;
        if rows.is_empty() {
            return Err(Error::Contract("gather of zero rows".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= v) {
            return Err(Error::InvalidShape(format!(
                "gather row {bad} out of bounds for {}",
                self.shape(table)
            )));
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(&src[r * d..(r + 1) * d]);
        }
        let t = Tensor::from_parts(Shape(vec![rows.len(), d]), data);
        Ok(self.push(
            t,
            Op::Gather {
                table,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Row-wise softmax over the last axis of a matrix.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.matrix_dims("softmax_rows", a)?;
        let mut data = Vec::with_capacity(rows * cols);
        for chunk in self.value(a).data().chunks_exact(cols) {
            let max = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = data.len();
            data.extend(chunk.iter().map(|x| (x - max).exp()));
            let z: f64 = data[start..].iter().sum();
            data[start..].iter_mut().for_each(|e| *e /= z);
        }
        let t = Tensor::from_parts(Shape(vec![rows, cols]), data);
        Ok(self.push(t, Op::Softmax(a)))
    }

    /// Mean over examples of the positively weighted logistic loss
    /// `-[w z ln s(x) + (1 - z) ln(1 - s(x))]`, evaluated through softplus.
    pub fn weighted_bce(&mut self, logits: Var, labels: &[f64], pos_weight: f64) -> Result<Var> {
        let x = self.value(logits);
        if x.numel() != labels.len() {
            return Err(Error::Contract(format!(
                "weighted_bce: {} logits but {} labels",
                x.numel(),
                labels.len()
            )));
        }
        if !(pos_weight >= 0.0 && pos_weight.is_finite()) {
            return Err(Error::Contract(format!(
                "weighted_bce: positive weight {pos_weight} must be finite and non-negative"
            )));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(labels)
            .map(|(&x, &z)| pos_weight * z * softplus(-x) + (1.0 - z) * softplus(x))
            .sum();
        let t = Tensor::scalar(total / labels.len() as f64);
        Ok(self.push(
            t,
            Op::WeightedBce {
                logits,
                labels: labels.to_vec(),
                pos_weight,
            },
        ))
    }

    /// Reverse sweep from a one-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::filled(root_value.shape(), 1.0));
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = self.value(*a);
                let tb = self.value(*b);
                let (p, q) = (ta.dims()[0], ta.dims()[1]);
                let r = tb.dims()[1];
                let mut da = vec![0.0; p * q];
                gemm(p, r, q, g.data(), false, tb.data(), true, &mut da);
                accumulate(grads, *a, Tensor::from_parts(ta.shape().clone(), da));
                let mut db = vec![0.0; q * r];
                gemm(q, p, r, ta.data(), true, g.data(), false, &mut db);
                accumulate(grads, *b, Tensor::from_parts(tb.shape().clone(), db));
            }
            Op::Hadamard(a, b) => {
                let da = zip_map(g, self.value(*b), |g, y| g * y);
                let db = zip_map(g, self.value(*a), |g, x| g * x);
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, map(g, |v| -v));
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *a, g.clone());
                let n = self.value(*row).numel();
                let mut dr = vec![0.0; n];
                for chunk in g.data().chunks_exact(n) {
                    dr.iter_mut().zip(chunk).for_each(|(d, v)| *d += v);
                }
                accumulate(grads, *row, Tensor::from_parts(self.shape(*row).clone(), dr));
            }
            Op::MulCol(a, col) => {
                let ta = self.value(*a);
                let tc = self.value(*col);
                let cols = ta.dims()[1];
                let mut da = Vec::with_capacity(ta.numel());
                let mut dc = Vec::with_capacity(tc.numel());
                for ((gr, ar), k) in g
                    .data()
                    .chunks_exact(cols)
                    .zip(ta.data().chunks_exact(cols))
                    .zip(tc.data())
                {
                    da.extend(gr.iter().map(|v| v * k));
                    dc.push(gr.iter().zip(ar).map(|(x, y)| x * y).sum());
                }
                accumulate(grads, *a, Tensor::from_parts(ta.shape().clone(), da));
                accumulate(grads, *col, Tensor::from_parts(tc.shape().clone(), dc));
            }
            Op::Affine(a, alpha) => accumulate(grads, *a, map(g, |v| alpha * v)),
            Op::Activation(a, kind) => {
                let d = zip_map(g, &node.value, |g, y| g * kind.derivative_from_output(y));
                accumulate(grads, *a, d);
            }
            Op::Concat(parts, axis) => {
                let dims = node.value.dims();
                let outer: usize = dims[..*axis].iter().product();
                let inner: usize = dims[axis + 1..].iter().product();
                let row = dims[*axis] * inner;
                let mut offset = 0;
                for &p in parts {
                    let shape = self.shape(p);
                    let chunk = shape.dims()[*axis] * inner;
                    let mut dp = Vec::with_capacity(shape.numel());
                    for o in 0..outer {
                        let base = o * row + offset;
                        dp.extend_from_slice(&g.data()[base..base + chunk]);
                    }
                    accumulate(grads, p, Tensor::from_parts(shape.clone(), dp));
                    offset += chunk;
                }
            }
            Op::Slice { src, axis, start, end } => {
                let shape = self.shape(*src);
                let dims = shape.dims();
                let outer: usize = dims[..*axis].iter().product();
                let inner: usize = dims[axis + 1..].iter().product();
                let width = (end - start) * inner;
                let mut ds = vec![0.0; shape.numel()];
                for o in 0..outer {
                    let base = o * dims[*axis] * inner + start * inner;
                    ds[base..base + width].copy_from_slice(&g.data()[o * width..(o + 1) * width]);
                }
                accumulate(grads, *src, Tensor::from_parts(shape.clone(), ds));
            }
            Op::Reshape(src) => {
                let d = g.clone().reshaped(self.shape(*src).clone());
                accumulate(grads, *src, d);
            }
            Op::SumAll(a) => {
                let v = g.data()[0];
                accumulate(grads, *a, Tensor::filled(self.shape(*a), v));
            }
            Op::Gather { table, rows } => {
                let shape = self.shape(*table);
                let d = shape.dims()[1];
                let mut dt = vec![0.0; shape.numel()];
                for (k, &r) in rows.iter().enumerate() {
                    dt[r * d..(r + 1) * d]
                        .iter_mut()
                        .zip(&g.data()[k * d..(k + 1) * d])
                        .for_each(|(t, v)| *t += v);
                }
                accumulate(grads, *table, Tensor::from_parts(shape.clone(), dt));
            }
            Op::Softmax(a) => {
                let cols = node.value.dims()[1];
                let mut da = Vec::with_capacity(node.value.numel());
                for (gr, yr) in g.data().chunks_exact(cols).zip(node.value.data().chunks_exact(cols)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                    da.extend(gr.iter().zip(yr).map(|(x, y)| y * (x - dot)));
                }
                accumulate(grads, *a, Tensor::from_parts(node.value.shape().clone(), da));
            }
            Op::WeightedBce {
                logits,
                labels,
                pos_weight,
            } => {
                let scale = g.data()[0] / labels.len() as f64;
                let x = self.value(*logits);
                let d = x
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&x, &z)| {
                        let s = sigmoid(x);
                        scale * (pos_weight * z * (s - 1.0) + (1.0 - z) * s)
                    })
                    .collect();
                accumulate(grads, *logits, Tensor::from_parts(x.shape().clone(), d));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().clone(), t.data().iter().map(|&v| f(v)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().clone(), data)
}

/// `c = op(a) * op(b)` for row-major operands, where `op(a)` is `m x k`
/// and `op(b)` is `k x n`. Transposition is expressed through strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64]) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

//! Reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s in append
//! order. [`Tape::backward`] walks the records once, last to first, and
//! accumulates gradients additively, so a value consumed by several
//! operations receives the sum of all contributions.
//!
//! The operation set is deliberately small: dense matmul, leading-1
//! broadcasting arithmetic, a handful of pointwise functions, and the
//! row gather/scatter and segment-softmax primitives that message passing
//! over variable-size blocks needs.

use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::tensor::{broadcast_shape, matmul_raw, transpose_raw, Tensor};

/// Row indices shared between the forward record and its backward rule.
pub type Index = Arc<[usize]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unary {
    Exp,
    Ln,
    Sqrt,
    Recip,
    Square,
    Silu,
    Relu,
    Sigmoid,
    Softplus,
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Sqrt => x.sqrt(),
            Unary::Recip => 1.0 / x,
            Unary::Square => x * x,
            Unary::Silu => x * sigmoid(x),
            Unary::Relu => x.max(0.0),
            Unary::Sigmoid => sigmoid(x),
            Unary::Softplus => softplus(x),
        }
    }

    /// dy/dx given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Exp => y,
            Unary::Ln => 1.0 / x,
            Unary::Sqrt => 0.5 / y,
            Unary::Recip => -y * y,
            Unary::Square => 2.0 * x,
            Unary::Silu => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Softplus => sigmoid(x),
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

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Unary(usize, Unary),
    SumAll(usize),
    SumCols(usize),
    SumRows(usize),
    BroadcastCols(usize),
    ScaleRows(usize, usize),
    Reshape(usize),
    Gather(usize, Index),
    ScatterAdd(usize, Index),
    SegmentSoftmax(usize, Index),
    ConcatCols(Vec<usize>),
    RowNorms(usize),
    NormalizeRows(usize, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of a forward computation.
///
/// Single-owner: a tape is not `Sync`. Independent passes use independent
/// tapes.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A tensor value together with its position on a tape.
#[derive(Clone, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
    value: Tensor,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an input tensor. Gradients are reported for every leaf the
    /// loss depends on.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node {
            value: value.clone(),
            op,
        });
        Var {
            tape: self,
            id,
            value,
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: &Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(self, loss.tape) {
            return Err(TensorError::ForeignTape);
        }
        if !loss.value.is_scalar() {
            return Err(TensorError::NonScalarLoss(loss.value.shape().to_vec()));
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let val = |i: usize| nodes[i].value.data();
            match &node.op {
                Op::Leaf => unreachable!("leaves are skipped"),
                Op::MatMul(a, b) => {
                    let (m, k) = nodes[*a].value.dims2("matmul")?;
                    let n = nodes[*b].value.shape()[1];
                    let bt = transpose_raw(val(*b), k, n);
                    accumulate(&mut grads, *a, matmul_raw(&g, &bt, m, n, k));
                    let at = transpose_raw(val(*a), m, k);
                    accumulate(&mut grads, *b, matmul_raw(&at, &g, k, m, n));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, reduce_to(&g, val(*a).len()));
                    accumulate(&mut grads, *b, reduce_to(&g, val(*b).len()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, reduce_to(&g, val(*a).len()));
                    let gb = reduce_to(&g, val(*b).len()).into_iter().map(|v| -v).collect();
                    accumulate(&mut grads, *b, gb);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let ga: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * bv[i % bv.len()])
                        .collect();
                    let gb: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, gi)| gi * av[i % av.len()])
                        .collect();
                    accumulate(&mut grads, *a, reduce_to(&ga, av.len()));
                    accumulate(&mut grads, *b, reduce_to(&gb, bv.len()));
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.iter().map(|v| v * c).collect());
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Unary(a, f) => {
                    let x = val(*a);
                    let y = node.value.data();
                    let ga = g
                        .iter()
                        .zip(x.iter().zip(y))
                        .map(|(gi, (&xi, &yi))| gi * f.derivative(xi, yi))
                        .collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumAll(a) => accumulate(&mut grads, *a, vec![g[0]; val(*a).len()]),
                Op::SumCols(a) => {
                    let (n, m) = nodes[*a].value.dims2("sum_cols")?;
                    let mut ga = Vec::with_capacity(n * m);
                    for gi in &g {
                        ga.extend(std::iter::repeat_n(*gi, m));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumRows(a) => {
                    let (n, _) = nodes[*a].value.dims2("sum_rows")?;
                    let mut ga = Vec::with_capacity(n * g.len());
                    for _ in 0..n {
                        ga.extend_from_slice(&g);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::BroadcastCols(a) => {
                    let m = node.value.shape()[1];
                    let ga = g.chunks(m).map(|row| row.iter().sum()).collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::ScaleRows(x, s) => {
                    let (xv, sv) = (val(*x), val(*s));
                    let m = if sv.is_empty() { 0 } else { xv.len() / sv.len() };
                    let mut gx = vec![0.0; xv.len()];
                    let mut gs = vec![0.0; sv.len()];
                    for (i, si) in sv.iter().enumerate() {
                        for j in 0..m {
                            let k = i * m + j;
                            gx[k] = g[k] * si;
                            gs[i] += g[k] * xv[k];
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *s, gs);
                }
                Op::Reshape(a) => accumulate(&mut grads, *a, g),
                Op::Gather(a, idx) => {
                    let src = &nodes[*a].value;
                    let w = row_width(src);
                    let mut ga = vec![0.0; src.numel()];
                    for (r, &i) in idx.iter().enumerate() {
                        for j in 0..w {
                            ga[i * w + j] += g[r * w + j];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ScatterAdd(a, idx) => {
                    let w = row_width(&nodes[*a].value);
                    let mut ga = Vec::with_capacity(idx.len() * w);
                    for &i in idx.iter() {
                        ga.extend_from_slice(&g[i * w..(i + 1) * w]);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, offsets) => {
                    let y = node.value.data();
                    let mut ga = vec![0.0; y.len()];
                    for seg in offsets.windows(2) {
                        let r = seg[0]..seg[1];
                        let dot: f64 = g[r.clone()].iter().zip(&y[r.clone()]).map(|(a, b)| a * b).sum();
                        for k in r {
                            ga[k] = y[k] * (g[k] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let total = node.value.shape()[1];
                    let n = node.value.shape()[0];
                    let mut col = 0;
                    for &p in parts {
                        let w = nodes[p].value.shape()[1];
                        let mut gp = Vec::with_capacity(n * w);
                        for i in 0..n {
                            gp.extend_from_slice(&g[i * total + col..i * total + col + w]);
                        }
                        accumulate(&mut grads, p, gp);
                        col += w;
                    }
                }
                Op::RowNorms(a) => {
                    let x = val(*a);
                    let norms = node.value.data();
                    let m = if norms.is_empty() { 0 } else { x.len() / norms.len() };
                    let mut ga = vec![0.0; x.len()];
                    for (i, &nrm) in norms.iter().enumerate() {
                        if nrm > 0.0 {
                            for j in 0..m {
                                ga[i * m + j] = g[i] * x[i * m + j] / nrm;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::NormalizeRows(a, eps) => {
                    let x = val(*a);
                    let y = node.value.data();
                    let m = row_width(&node.value);
                    let mut ga = vec![0.0; x.len()];
                    for (i, (xr, (yr, gr))) in x
                        .chunks(m)
                        .zip(y.chunks(m).zip(g.chunks(m)))
                        .enumerate()
                    {
                        let nrm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if nrm > *eps {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for j in 0..m {
                                ga[i * m + j] = (gr[j] - yr[j] * dot) / nrm;
                            }
                        } else {
                            for j in 0..m {
                                ga[i * m + j] = gr[j] / eps;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
            }
        }

        let shapes = nodes.iter().map(|n| n.value.shape().to_vec());
        let grads = grads
            .into_iter()
            .zip(shapes)
            .enumerate()
            .map(|(id, (g, shape))| {
                g.filter(|_| matches!(nodes[id].op, Op::Leaf))
                    .map(|g| Tensor::new(shape, g).expect("gradient matches node shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: usize, g: Vec<f64>) {
    match &mut grads[id] {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Sums a broadcast gradient back down to an operand of `len` elements.
fn reduce_to(g: &[f64], len: usize) -> Vec<f64> {
    if g.len() == len {
        return g.to_vec();
    }
    let mut out = vec![0.0; len];
    for chunk in g.chunks(len) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    out
}

fn row_width(t: &Tensor) -> usize {
    match t.shape().first() {
        Some(&n) if n > 0 => t.numel() / n,
        _ => 1,
    }
}

/// Gradients of a scalar with respect to the leaves of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: &Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient for `var`, zero if the loss does not depend on it.
    pub fn wrt(&self, var: &Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value.shape()))
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    fn same_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(TensorError::ForeignTape)
        }
    }

    fn shape_err(&self, op: &'static str, other: &[usize]) -> TensorError {
        TensorError::Shape {
            op,
            lhs: self.shape().to_vec(),
            rhs: other.to_vec(),
        }
    }

    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let out = self.value.matmul(&other.value)?;
        Ok(self.tape.push(out, Op::MatMul(self.id, other.id)))
    }

    fn binary(
        &self,
        other: &Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let shape = broadcast_shape(self.shape(), other.shape())
            .ok_or_else(|| self.shape_err(name, other.shape()))?;
        let (a, b) = (self.value.data(), other.value.data());
        let n: usize = shape.iter().product();
        let data = (0..n).map(|i| f(a[i % a.len()], b[i % b.len()])).collect();
        Ok(self.tape.push(Tensor::new(shape, data)?, op))
    }

    /// Elementwise sum with leading-1 broadcasting.
    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.tape
            .push(self.value.map(|v| v * c), Op::Scale(self.id, c))
    }

    pub fn add_scalar(&self, c: f64) -> Var<'t> {
        self.tape.push(self.value.map(|v| v + c), Op::AddScalar(self.id))
    }

    fn unary(&self, f: Unary) -> Var<'t> {
        self.tape
            .push(self.value.map(|v| f.apply(v)), Op::Unary(self.id, f))
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Unary::Exp)
    }

    pub fn ln(&self) -> Var<'t> {
        self.unary(Unary::Ln)
    }

    pub fn sqrt(&self) -> Var<'t> {
        self.unary(Unary::Sqrt)
    }

    pub fn recip(&self) -> Var<'t> {
        self.unary(Unary::Recip)
    }

    pub fn square(&self) -> Var<'t> {
        self.unary(Unary::Square)
    }

    pub fn silu(&self) -> Var<'t> {
        self.unary(Unary::Silu)
    }

    pub fn relu(&self) -> Var<'t> {
        self.unary(Unary::Relu)
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(Unary::Sigmoid)
    }

    pub fn softplus(&self) -> Var<'t> {
        self.unary(Unary::Softplus)
    }

    /// Sum of all entries as a rank-0 tensor.
    pub fn sum(&self) -> Var<'t> {
        let s = self.value.sum();
        self.tape.push(Tensor::scalar(s), Op::SumAll(self.id))
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.value.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// `[n, m] -> [n]`, summing each row.
    pub fn sum_cols(&self) -> Result<Var<'t>> {
        let (_, m) = self.value.dims2("sum_cols")?;
        let data = if m == 0 {
            vec![0.0; self.shape()[0]]
        } else {
            self.value.data().chunks(m).map(|r| r.iter().sum()).collect()
        };
        Ok(self.tape.push(Tensor::vector(data), Op::SumCols(self.id)))
    }

    /// `[n, m] -> [m]`, summing over rows.
    pub fn sum_rows(&self) -> Result<Var<'t>> {
        let (_, m) = self.value.dims2("sum_rows")?;
        let mut out = vec![0.0; m];
        if m > 0 {
            for row in self.value.data().chunks(m) {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        Ok(self.tape.push(Tensor::vector(out), Op::SumRows(self.id)))
    }

    /// `[n] -> [n, m]`, repeating each entry across a row.
    pub fn broadcast_cols(&self, m: usize) -> Result<Var<'t>> {
        if self.value.rank() != 1 {
            return Err(self.shape_err("broadcast_cols", &[m]));
        }
        let n = self.shape()[0];
        let mut data = Vec::with_capacity(n * m);
        for &v in self.value.data() {
            data.extend(std::iter::repeat_n(v, m));
        }
        Ok(self
            .tape
            .push(Tensor::new(vec![n, m], data)?, Op::BroadcastCols(self.id)))
    }

    /// Multiplies row `i` of an `[n, m]` tensor by `s[i]`.
    pub fn scale_rows(&self, s: &Var<'t>) -> Result<Var<'t>> {
        self.same_tape(s)?;
        let (n, m) = self.value.dims2("scale_rows")?;
        if s.value.rank() != 1 || s.shape()[0] != n {
            return Err(self.shape_err("scale_rows", s.shape()));
        }
        let x = self.value.data();
        let mut data = Vec::with_capacity(n * m);
        for (i, si) in s.value.data().iter().enumerate() {
            data.extend(x[i * m..(i + 1) * m].iter().map(|v| v * si));
        }
        Ok(self
            .tape
            .push(Tensor::new(vec![n, m], data)?, Op::ScaleRows(self.id, s.id)))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let out = self.value.reshape(shape)?;
        Ok(self.tape.push(out, Op::Reshape(self.id)))
    }

    /// Selects rows (first-axis slices) by index; indices may repeat.
    pub fn gather_rows(&self, idx: &Index) -> Result<Var<'t>> {
        let n = *self.shape().first().ok_or_else(|| self.shape_err("gather_rows", &[]))?;
        let w = row_width(&self.value);
        let src = self.value.data();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx.iter() {
            if i >= n {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    extent: n,
                });
            }
            data.extend_from_slice(&src[i * w..(i + 1) * w]);
        }
        let mut shape = self.shape().to_vec();
        shape[0] = idx.len();
        Ok(self
            .tape
            .push(Tensor::new(shape, data)?, Op::Gather(self.id, Arc::clone(idx))))
    }

    /// Adds row `r` into output row `idx[r]`; the output has `n_out` rows.
    /// Rows are accumulated in input order.
    pub fn scatter_add_rows(&self, idx: &Index, n_out: usize) -> Result<Var<'t>> {
        let n = *self.shape().first().ok_or_else(|| self.shape_err("scatter_add_rows", &[]))?;
        if idx.len() != n {
            return Err(self.shape_err("scatter_add_rows", &[idx.len()]));
        }
        let w = row_width(&self.value);
        let src = self.value.data();
        let mut data = vec![0.0; n_out * w];
        for (r, &i) in idx.iter().enumerate() {
            if i >= n_out {
                return Err(TensorError::Index {
                    op: "scatter_add_rows",
                    index: i,
                    extent: n_out,
                });
            }
            for j in 0..w {
                data[i * w + j] += src[r * w + j];
            }
        }
        let mut shape = self.shape().to_vec();
        shape[0] = n_out;
        Ok(self.tape.push(
            Tensor::new(shape, data)?,
            Op::ScatterAdd(self.id, Arc::clone(idx)),
        ))
    }

    /// Softmax of a 1-D tensor within each contiguous segment
    /// `offsets[s]..offsets[s + 1]`, using per-segment max subtraction.
    pub fn segment_softmax(&self, offsets: &Index) -> Result<Var<'t>> {
        let x = self.value.data();
        if self.value.rank() != 1
            || offsets.first() != Some(&0)
            || offsets.last() != Some(&x.len())
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(self.shape_err("segment_softmax", &[offsets.len()]));
        }
        let mut out = vec![0.0; x.len()];
        for seg in offsets.windows(2) {
            let r = seg[0]..seg[1];
            let max = x[r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for k in r.clone() {
                out[k] = (x[k] - max).exp();
                total += out[k];
            }
            for v in &mut out[r] {
                *v /= total;
            }
        }
        Ok(self.tape.push(
            Tensor::vector(out),
            Op::SegmentSoftmax(self.id, Arc::clone(offsets)),
        ))
    }

    /// Row-wise softmax of an `[m, n]` tensor.
    pub fn softmax_rows(&self) -> Result<Var<'t>> {
        let (m, n) = self.value.dims2("softmax_rows")?;
        let offsets: Index = (0..=m).map(|i| i * n).collect();
        self.reshape(&[m * n])?
            .segment_softmax(&offsets)?
            .reshape(&[m, n])
    }

    /// Horizontal concatenation of `[n, w_k]` tensors.
    pub fn concat_cols(parts: &[&Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| TensorError::Shape {
            op: "concat_cols",
            lhs: vec![],
            rhs: vec![],
        })?;
        let (n, _) = first.value.dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            first.same_tape(p)?;
            let (pn, pw) = p.value.dims2("concat_cols")?;
            if pn != n {
                return Err(first.shape_err("concat_cols", p.shape()));
            }
            widths.push(pw);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&p.value.data()[i * w..(i + 1) * w]);
            }
        }
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(first
            .tape
            .push(Tensor::new(vec![n, total], data)?, Op::ConcatCols(ids)))
    }

    /// Euclidean norm of each row, `[n, m] -> [n]`. The gradient at a zero
    /// row is taken to be zero.
    pub fn row_norms(&self) -> Result<Var<'t>> {
        let (_, m) = self.value.dims2("row_norms")?;
        let data = self
            .value
            .data()
            .chunks(m.max(1))
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Ok(self.tape.push(Tensor::vector(data), Op::RowNorms(self.id)))
    }

    /// `v / max(‖v‖, eps)` for every row.
    pub fn normalize_rows(&self, eps: f64) -> Result<Var<'t>> {
        let (_, m) = self.value.dims2("normalize_rows")?;
        let mut data = Vec::with_capacity(self.value.numel());
        for r in self.value.data().chunks(m.max(1)) {
            let nrm = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
            data.extend(r.iter().map(|v| v / nrm));
        }
        Ok(self.tape.push(
            Tensor::new(self.shape().to_vec(), data)?,
            Op::NormalizeRows(self.id, eps),
        ))
    }
}

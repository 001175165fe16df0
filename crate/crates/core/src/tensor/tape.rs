//! Wengert-list reverse-mode differentiation.
//!
//! Every forward op appends one node holding its output value and the
//! information its vector-Jacobian product needs. Nodes only ever reference
//! earlier nodes, so a single reverse sweep visits each record once.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{gemm_nt, gemm_tn, numel, MatmulPlan, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    index: usize,
    tape: u64,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// A linear operator with an explicit adjoint, recorded as a single tape node.
pub trait LinearMap<T>: Send + Sync {
    fn name(&self) -> &'static str;
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;
    fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>>;
    /// Applies the transpose to an output-space cotangent.
    fn adjoint(&self, g: &Tensor<T>, input_shape: &[usize]) -> Tensor<T>;
}

enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    MatMul(usize, usize, MatmulPlan),
    Reshape(usize),
    Transpose(usize),
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Concat {
        xs: Vec<usize>,
        axis: usize,
    },
    Softmax(usize),
    Gelu(usize),
    Relu(usize),
    Ln(usize),
    Sum(usize),
    Mean(usize),
    LayerNorm {
        x: usize,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    GatherRows {
        x: usize,
        idx: Vec<usize>,
    },
    Linear {
        x: usize,
        map: Arc<dyn LinearMap<T>>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("id", &self.id)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    tape: u64,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the root with respect to `var`, if `var` required one.
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(Option::as_ref)
    }
}

/// Position of `rhs` relative to `lhs` in a broadcasting elementwise op.
fn broadcast_ok(lhs: &[usize], rhs: &[usize]) -> bool {
    lhs == rhs || (rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs)
}

/// `(outer, extent, inner)` split of `shape` around `axis`.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    )
}

fn gelu_parts<T: Scalar>(x: T) -> (T, T) {
    let s = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let c = T::lit(0.044715);
    let half = T::lit(0.5);
    let one = T::one();
    let inner = s * (x + c * x * x * x);
    let t = inner.tanh();
    let value = half * x * (one + t);
    let deriv = half * (one + t) + half * x * (one - t * t) * s * (one + T::lit(3.0) * c * x * x);
    (value, deriv)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::DetachedRoot);
        }
        Ok(v.index)
    }

    fn val(&self, i: usize) -> &Tensor<T> {
        &self.nodes[i].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[usize]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        let index = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            index,
            tape: self.id,
        })
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            index,
            tape: self.id,
        }
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[self.idx(v).expect("var belongs to tape")].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: fn(usize, usize) -> Op<T>,
    ) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (self.val(ia), self.val(ib));
        if !broadcast_ok(va.shape(), vb.shape()) {
            return Err(Error::shape(name, va.shape(), vb.shape()));
        }
        let m = vb.len();
        let data = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, vb.data()[i % m]))
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        self.push(name, out, op(ia, ib), &[ia, ib])
    }

    /// `a + b`; `b` may broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).map(|v| v * c);
        self.push("scale", out, Op::Scale(ix, c), &[ix])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let plan = MatmulPlan::new(self.val(ia).shape(), self.val(ib).shape())?;
        let mut out = vec![T::zero(); plan.out_numel()];
        plan.run(self.val(ia).data(), self.val(ib).data(), &mut out);
        let out = Tensor::new(plan.out_shape.clone(), out)?;
        self.push("matmul", out, Op::MatMul(ia, ib, plan), &[ia, ib])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).clone().reshaped(shape)?;
        self.push("reshape", out, Op::Reshape(ix), &[ix])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).transpose_last2()?;
        self.push("transpose", out, Op::Transpose(ix), &[ix])
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = self.val(ix);
        let shape = v.shape();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(Error::shape("slice", shape, &[axis, start, len]));
        }
        let (outer, n, inner) = axis_split(shape, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner;
            data.extend_from_slice(&v.data()[base + start * inner..base + (start + len) * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let out = Tensor::new(out_shape, data)?;
        self.push("slice", out, Op::Slice { x: ix, axis, start }, &[ix])
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let idxs = xs.iter().map(|&v| self.idx(v)).collect::<Result<Vec<_>>>()?;
        let first = self
            .val(*idxs.first().ok_or_else(|| Error::shape("concat", &[], &[]))?)
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(Error::shape("concat", &first, &[axis]));
        }
        let mut total = 0;
        for &i in &idxs {
            let s = self.val(i).shape();
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &first, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &i in &idxs {
                let v = self.val(i);
                let n = v.shape()[axis];
                data.extend_from_slice(&v.data()[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let out = Tensor::new(shape, data)?;
        self.push("concat", out, Op::Concat { xs: idxs.clone(), axis }, &idxs)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = self.val(ix);
        let n = *v.shape().last().ok_or_else(|| Error::shape("softmax", &[], &[]))?;
        if n == 0 {
            return Err(Error::shape("softmax", v.shape(), &[]));
        }
        let mut data = v.data().to_vec();
        for row in data.chunks_mut(n) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for e in row.iter_mut() {
                *e = (*e - max).exp();
                total += *e;
            }
            for e in row.iter_mut() {
                *e /= total;
            }
        }
        let out = Tensor::new(v.shape().to_vec(), data)?;
        self.push("softmax", out, Op::Softmax(ix), &[ix])
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).map(|v| gelu_parts(v).0);
        self.push("gelu", out, Op::Gelu(ix), &[ix])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).map(|v| v.max(T::zero()));
        self.push("relu", out, Op::Relu(ix), &[ix])
    }

    /// Natural logarithm.
    pub fn ln(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.val(ix).map(T::ln);
        self.push("ln", out, Op::Ln(ix), &[ix])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = Tensor::scalar(self.val(ix).sum());
        self.push("sum", out, Op::Sum(ix), &[ix])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = self.val(ix);
        let out = Tensor::scalar(v.sum() / T::from_usize_lossy(v.len()));
        self.push("mean", out, Op::Mean(ix), &[ix])
    }

    /// Normalizes the last axis to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = self.val(ix);
        let n = *v.shape().last().ok_or_else(|| Error::shape("layer_norm", &[], &[]))?;
        if n == 0 {
            return Err(Error::shape("layer_norm", v.shape(), &[]));
        }
        let nt = T::from_usize_lossy(n);
        let eps = T::lit(LAYER_NORM_EPS);
        let mut xhat = Vec::with_capacity(v.len());
        let mut inv_std = Vec::with_capacity(v.len() / n);
        for row in v.data().chunks(n) {
            let mean = row.iter().copied().sum::<T>() / nt;
            let var = row.iter().map(|&e| (e - mean) * (e - mean)).sum::<T>() / nt;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            xhat.extend(row.iter().map(|&e| (e - mean) * is));
        }
        let out = Tensor::new(v.shape().to_vec(), xhat.clone())?;
        self.push("layer_norm", out, Op::LayerNorm { x: ix, xhat, inv_std }, &[ix])
    }

    /// Selects (and possibly repeats) slabs along the first axis.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = self.val(ix);
        let shape = v.shape();
        if shape.is_empty() || idx.iter().any(|&i| i >= shape[0]) || idx.is_empty() {
            return Err(Error::shape("gather_rows", shape, &[idx.len()]));
        }
        let row = numel(&shape[1..]);
        let mut data = Vec::with_capacity(idx.len() * row);
        for &i in idx {
            data.extend_from_slice(&v.data()[i * row..(i + 1) * row]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[0] = idx.len();
        let out = Tensor::new(out_shape, data)?;
        self.push(
            "gather_rows",
            out,
            Op::GatherRows {
                x: ix,
                idx: idx.to_vec(),
            },
            &[ix],
        )
    }

    pub fn apply_linear(&mut self, x: Var, map: Arc<dyn LinearMap<T>>) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = map.apply(self.val(ix))?;
        let name = map.name();
        self.push(name, out, Op::Linear { x: ix, map }, &[ix])
    }

    /// Reverse sweep from a scalar root. Gradients accumulate over every use of a value.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let r = self.idx(root)?;
        let root_shape = self.val(r).shape();
        if self.val(r).len() != 1 {
            return Err(Error::NotScalar(root_shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[r] = Some(vec![T::one()]);
        for i in (0..=r).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|g| Tensor::new(self.nodes[i].value.shape().to_vec(), g).expect("grad shape"))
            })
            .collect();
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], i: usize) -> Option<&'g mut Vec<T>> {
        if !self.nodes[i].requires_grad {
            return None;
        }
        let len = self.nodes[i].value.len();
        Some(grads[i].get_or_insert_with(|| vec![T::zero(); len]))
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(self.nodes[i].op, Op::Sub(..)) {
                    -T::one()
                } else {
                    T::one()
                };
                if let Some(ga) = self.slot(grads, *a) {
                    for (x, &y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    let m = gb.len();
                    for (k, &y) in g.iter().enumerate() {
                        gb[k % m] += sign * y;
                    }
                }
            }
            Op::Mul(a, b) => {
                let va = self.val(*a).data();
                let vb = self.val(*b).data();
                let m = vb.len();
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, (x, &y)) in ga.iter_mut().zip(g).enumerate() {
                        *x += y * vb[k % m];
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for (k, &y) in g.iter().enumerate() {
                        gb[k % m] += y * va[k];
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (e, &y) in gx.iter_mut().zip(g) {
                        *e += y * *c;
                    }
                }
            }
            Op::MatMul(a, b, plan) => {
                let (m, k, n) = (plan.m, plan.k, plan.n);
                let va = self.val(*a).data();
                let vb = self.val(*b).data();
                if let Some(ga) = self.slot(grads, *a) {
                    for bi in 0..plan.batch {
                        let bsl = if plan.rhs_batched {
                            &vb[bi * k * n..(bi + 1) * k * n]
                        } else {
                            &vb[..k * n]
                        };
                        gemm_nt(
                            &g[bi * m * n..(bi + 1) * m * n],
                            bsl,
                            &mut ga[bi * m * k..(bi + 1) * m * k],
                            m,
                            k,
                            n,
                        );
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for bi in 0..plan.batch {
                        let off = if plan.rhs_batched { bi * k * n } else { 0 };
                        gemm_tn(
                            &va[bi * m * k..(bi + 1) * m * k],
                            &g[bi * m * n..(bi + 1) * m * n],
                            &mut gb[off..off + k * n],
                            m,
                            k,
                            n,
                        );
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (e, &y) in gx.iter_mut().zip(g) {
                        *e += y;
                    }
                }
            }
            Op::Transpose(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    let gt = Tensor::new(out.shape().to_vec(), g.to_vec())
                        .and_then(|t| t.transpose_last2())
                        .expect("transpose grad");
                    for (e, &y) in gx.iter_mut().zip(gt.data()) {
                        *e += y;
                    }
                }
            }
            Op::Slice { x, axis, start } => {
                let in_shape = self.val(*x).shape().to_vec();
                if let Some(gx) = self.slot(grads, *x) {
                    let (outer, n, inner) = axis_split(&in_shape, *axis);
                    let len = out.shape()[*axis];
                    for o in 0..outer {
                        let dst = &mut gx[o * n * inner + start * inner..o * n * inner + (start + len) * inner];
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        for (e, &y) in dst.iter_mut().zip(src) {
                            *e += y;
                        }
                    }
                }
            }
            Op::Concat { xs, axis } => {
                let (outer, total, inner) = axis_split(out.shape(), *axis);
                let mut offset = 0;
                for &x in xs {
                    let n = self.val(x).shape()[*axis];
                    if let Some(gx) = self.slot(grads, x) {
                        for o in 0..outer {
                            let src = &g[o * total * inner + offset * inner..o * total * inner + (offset + n) * inner];
                            for (e, &y) in gx[o * n * inner..(o + 1) * n * inner].iter_mut().zip(src) {
                                *e += y;
                            }
                        }
                    }
                    offset += n;
                }
            }
            Op::Softmax(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    let n = *out.shape().last().unwrap();
                    for ((gxr, yr), gr) in gx.chunks_mut(n).zip(out.data().chunks(n)).zip(g.chunks(n)) {
                        let dot: T = yr.iter().zip(gr).map(|(&y, &d)| y * d).sum();
                        for ((e, &y), &d) in gxr.iter_mut().zip(yr).zip(gr) {
                            *e += y * (d - dot);
                        }
                    }
                }
            }
            Op::Gelu(x) => {
                let vx = self.val(*x).data();
                if let Some(gx) = self.slot(grads, *x) {
                    for ((e, &v), &y) in gx.iter_mut().zip(vx).zip(g) {
                        *e += y * gelu_parts(v).1;
                    }
                }
            }
            Op::Relu(x) => {
                let vx = self.val(*x).data();
                if let Some(gx) = self.slot(grads, *x) {
                    for ((e, &v), &y) in gx.iter_mut().zip(vx).zip(g) {
                        if v > T::zero() {
                            *e += y;
                        }
                    }
                }
            }
            Op::Ln(x) => {
                let vx = self.val(*x).data();
                if let Some(gx) = self.slot(grads, *x) {
                    for ((e, &v), &y) in gx.iter_mut().zip(vx).zip(g) {
                        *e += y / v;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    for e in gx.iter_mut() {
                        *e += g[0];
                    }
                }
            }
            Op::Mean(x) => {
                if let Some(gx) = self.slot(grads, *x) {
                    let w = g[0] / T::from_usize_lossy(gx.len());
                    for e in gx.iter_mut() {
                        *e += w;
                    }
                }
            }
            Op::LayerNorm { x, xhat, inv_std } => {
                if let Some(gx) = self.slot(grads, *x) {
                    let n = *out.shape().last().unwrap();
                    let nt = T::from_usize_lossy(n);
                    for (r, ((gxr, xr), gr)) in gx
                        .chunks_mut(n)
                        .zip(xhat.chunks(n))
                        .zip(g.chunks(n))
                        .enumerate()
                    {
                        let mean_g = gr.iter().copied().sum::<T>() / nt;
                        let mean_gx = gr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>() / nt;
                        for ((e, &xh), &d) in gxr.iter_mut().zip(xr).zip(gr) {
                            *e += inv_std[r] * (d - mean_g - xh * mean_gx);
                        }
                    }
                }
            }
            Op::GatherRows { x, idx } => {
                let row = numel(&out.shape()[1..]);
                if let Some(gx) = self.slot(grads, *x) {
                    for (k, &src) in idx.iter().enumerate() {
                        for (e, &y) in gx[src * row..(src + 1) * row]
                            .iter_mut()
                            .zip(&g[k * row..(k + 1) * row])
                        {
                            *e += y;
                        }
                    }
                }
            }
            Op::Linear { x, map } => {
                let in_shape = self.val(*x).shape().to_vec();
                if let Some(gx) = self.slot(grads, *x) {
                    let gt = Tensor::new(out.shape().to_vec(), g.to_vec()).expect("linear grad");
                    let back = map.adjoint(&gt, &in_shape);
                    for (e, &y) in gx.iter_mut().zip(back.data()) {
                        *e += y;
                    }
                }
            }
        }
    }
}

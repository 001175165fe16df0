//! Dense row-major tensors and the reverse-mode tape built on them.

mod adam;
mod gradcheck;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_with};
pub use tape::{Gradients, LinearMap, Tape, Var};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array. `shape` may be empty for a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::shape("tensor", &shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: (0..numel(shape)).map(&mut f).collect(),
        }
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { T::one() } else { T::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` of a 2D tensor.
    pub fn row(&self, i: usize) -> &[T] {
        let cols = *self.shape.last().unwrap_or(&1);
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn at2(&self, i: usize, j: usize) -> T {
        self.data[i * self.shape[1] + j]
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn sum_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    /// Swaps the last two axes.
    pub fn transpose_last2(&self) -> Result<Self> {
        let nd = self.shape.len();
        if nd < 2 {
            return Err(Error::shape("transpose", &self.shape, &[]));
        }
        let (r, c) = (self.shape[nd - 2], self.shape[nd - 1]);
        let mut shape = self.shape.clone();
        shape.swap(nd - 2, nd - 1);
        let mut data = vec![T::zero(); self.data.len()];
        for (b, chunk) in self.data.chunks(r * c).enumerate() {
            let out = &mut data[b * r * c..(b + 1) * r * c];
            for i in 0..r {
                for j in 0..c {
                    out[j * r + i] = chunk[i * c + j];
                }
            }
        }
        Ok(Self { shape, data })
    }

    /// Plain matrix product, batched over identical leading axes or broadcasting a 2D rhs.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let plan = MatmulPlan::new(&self.shape, &rhs.shape)?;
        let mut out = vec![T::zero(); plan.out_numel()];
        plan.run(&self.data, &rhs.data, &mut out);
        Ok(Self {
            shape: plan.out_shape,
            data: out,
        })
    }
}

/// Shape bookkeeping for `[.., m, k] x [.., k, n]` products.
#[derive(Clone, Debug)]
pub(crate) struct MatmulPlan {
    pub batch: usize,
    pub rhs_batched: bool,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub out_shape: Vec<usize>,
}

impl MatmulPlan {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        let err = || Error::shape("matmul", a, b);
        if a.len() < 2 || b.len() < 2 {
            return Err(err());
        }
        let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
        let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
        if k != k2 {
            return Err(err());
        }
        let lead_a = &a[..a.len() - 2];
        let lead_b = &b[..b.len() - 2];
        let rhs_batched = !lead_b.is_empty();
        if rhs_batched && lead_a != lead_b {
            return Err(err());
        }
        let mut out_shape = lead_a.to_vec();
        out_shape.extend([m, n]);
        Ok(Self {
            batch: numel(lead_a),
            rhs_batched,
            m,
            k,
            n,
            out_shape,
        })
    }

    pub fn out_numel(&self) -> usize {
        self.batch * self.m * self.n
    }

    /// `out += a * b` for every batch.
    pub fn run<T: Scalar>(&self, a: &[T], b: &[T], out: &mut [T]) {
        let (m, k, n) = (self.m, self.k, self.n);
        for bi in 0..self.batch {
            let a = &a[bi * m * k..(bi + 1) * m * k];
            let b = if self.rhs_batched {
                &b[bi * k * n..(bi + 1) * k * n]
            } else {
                &b[..k * n]
            };
            let out = &mut out[bi * m * n..(bi + 1) * m * n];
            gemm_nn(a, b, out, m, k, n);
        }
    }
}

/// `out[m,n] += a[m,k] * b[k,n]`
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,k] += g[m,n] * b[k,n]^T`
pub(crate) fn gemm_nt<T: Scalar>(g: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = T::zero();
            for (&x, &y) in grow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * k + p] += acc;
        }
    }
}

/// `out[k,n] += a[m,k]^T * g[m,n]`
pub(crate) fn gemm_tn<T: Scalar>(a: &[T], g: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

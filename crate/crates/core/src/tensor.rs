//! Dense row-major tensors and the raw (tape-free) kernels behind every
//! differentiable op.
//!
//! No implicit broadcasting: every op that combines tensors of different
//! shapes names the alignment it performs (`add_bias`, `repeat`, `scale_by`).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Floating-point element type. `f32` is the training type; `f64` is the
/// check mode used for gradient verification.
pub trait Scalar: Float + Default + Debug + Display + Send + Sync + Sum + 'static {
    /// FTPT dtype code.
    const DTYPE: u8;

    fn of(x: f64) -> Self;

    fn f64(self) -> f64;

    fn append_le(self, out: &mut Vec<u8>);
}

impl Scalar for f32 {
    const DTYPE: u8 = 0;

    fn of(x: f64) -> Self {
        x as f32
    }

    fn f64(self) -> f64 {
        self as f64
    }

    fn append_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Scalar for f64 {
    const DTYPE: u8 = 1;

    fn of(x: f64) -> Self {
        x
    }

    fn f64(self) -> f64 {
        self
    }

    fn append_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

/// Splits `dims` around `axis` into (outer, axis length, inner) extents.
pub(crate) fn axis_extents(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S = f32> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?} (product {expected})",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::full(dims, S::zero())
    }

    pub fn ones(dims: &[usize]) -> Self {
        Self::full(dims, S::one())
    }

    pub fn full(dims: &[usize], value: S) -> Self {
        let n = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: S) -> Self {
        Self {
            dims: vec![1],
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = S::one();
        }
        t
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize) -> S) -> Self {
        let n: usize = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// Gaussian entries with the given standard deviation.
    pub fn randn<R: Rng + ?Sized>(dims: &[usize], std: f64, rng: &mut R) -> Self {
        Self::from_fn(dims, |_| {
            let z: f64 = StandardNormal.sample(rng);
            S::of(z * std)
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Option<S> {
        if index.len() != self.dims.len() {
            return None;
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.dims) {
            if i >= d {
                return None;
            }
            flat = flat * d + i;
        }
        Some(self.data[flat])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| T::of(x.f64())).collect(),
        }
    }

    /// Little-endian bytes of the payload.
    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * std::mem::size_of::<S>());
        for &x in &self.data {
            x.append_le(&mut out);
        }
        out
    }

    /// SHA-256 over dims and payload; equal checksums mean bit-identical tensors.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for &d in &self.dims {
            h.update((d as u64).to_le_bytes());
        }
        h.update(self.payload_bytes());
        hex::encode(h.finalize())
    }

    fn check_axis(&self, op: &str, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::Shape(format!(
                "{op}: axis {axis} out of range for shape {:?}",
                self.dims
            )));
        }
        Ok(())
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != self.len() {
            return Err(Error::shape("reshape", &self.dims, dims));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &str, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape(op, &self.dims, &other.dims));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|x| x * s)
    }

    pub fn sum_all(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &x| acc + x)
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        if self.dims != other.dims {
            return Err(Error::shape("dot", &self.dims, &other.dims));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn l2_norm(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// `c[i,j] = sum_k a[i,k] * b[k,j]`, accumulated in increasing `k`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.dims[1] != other.dims[0] {
            return Err(Error::shape("matmul", &self.dims, &other.dims));
        }
        let (m, k, p) = (self.dims[0], self.dims[1], other.dims[1]);
        let mut out = vec![S::zero(); m * p];
        for i in 0..m {
            let row = &mut out[i * p..(i + 1) * p];
            for kk in 0..k {
                let a = self.data[i * k + kk];
                let brow = &other.data[kk * p..(kk + 1) * p];
                for (c, &b) in row.iter_mut().zip(brow) {
                    *c = *c + a * b;
                }
            }
        }
        Ok(Self {
            dims: vec![m, p],
            data: out,
        })
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!(
                "transpose: expected rank 2, got {:?}",
                self.dims
            )));
        }
        let (r, c) = (self.dims[0], self.dims[1]);
        let mut out = vec![S::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self {
            dims: vec![c, r],
            data: out,
        })
    }

    /// `x[..., d] + bias[d]` for every leading index.
    pub fn add_bias(&self, bias: &Self) -> Result<Self> {
        let d = *self.dims.last().unwrap_or(&0);
        if bias.rank() != 1 || bias.dims[0] != d {
            return Err(Error::shape("add_bias", &self.dims, &bias.dims));
        }
        let mut out = self.data.clone();
        for row in out.chunks_mut(d.max(1)) {
            for (x, &b) in row.iter_mut().zip(&bias.data) {
                *x = *x + b;
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: out,
        })
    }

    /// Numerically stable softmax along `axis` (max subtraction).
    pub fn softmax(&self, axis: usize) -> Result<Self> {
        self.check_axis("softmax", axis)?;
        let (outer, n, inner) = axis_extents(&self.dims, axis);
        let mut out = self.data.clone();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let max = (0..n).fold(S::neg_infinity(), |m, j| m.max(self.data[idx(j)]));
                let mut total = S::zero();
                for j in 0..n {
                    let e = (self.data[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total = total + e;
                }
                for j in 0..n {
                    out[idx(j)] = out[idx(j)] / total;
                }
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: out,
        })
    }

    pub fn log_softmax(&self, axis: usize) -> Result<Self> {
        self.check_axis("log_softmax", axis)?;
        let (outer, n, inner) = axis_extents(&self.dims, axis);
        let mut out = self.data.clone();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let max = (0..n).fold(S::neg_infinity(), |m, j| m.max(self.data[idx(j)]));
                let total = (0..n).fold(S::zero(), |acc, j| acc + (self.data[idx(j)] - max).exp());
                let lse = max + total.ln();
                for j in 0..n {
                    out[idx(j)] = self.data[idx(j)] - lse;
                }
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: out,
        })
    }

    /// Sum over `axis`; the axis is dropped from the output shape.
    pub fn sum_along(&self, axis: usize) -> Result<Self> {
        self.check_axis("sum_along", axis)?;
        let (outer, n, inner) = axis_extents(&self.dims, axis);
        let mut out = vec![S::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let src = &self.data[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (acc, &x) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *acc = *acc + x;
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        if dims.is_empty() {
            dims.push(1);
        }
        Ok(Self { dims, data: out })
    }

    /// Arithmetic mean over `axis`; the axis is dropped from the output shape.
    pub fn mean_along(&self, axis: usize) -> Result<Self> {
        self.check_axis("mean_along", axis)?;
        let n = self.dims[axis];
        if n == 0 {
            return Err(Error::Shape(format!(
                "mean_along: axis {axis} of {:?} is empty",
                self.dims
            )));
        }
        let inv = S::one() / S::of(n as f64);
        Ok(self.sum_along(axis)?.scale(inv))
    }

    pub fn concat(&self, other: &Self, axis: usize) -> Result<Self> {
        if self.rank() != other.rank() || axis >= self.rank() {
            return Err(Error::shape("concat", &self.dims, &other.dims));
        }
        for (d, (&a, &b)) in self.dims.iter().zip(&other.dims).enumerate() {
            if d != axis && a != b {
                return Err(Error::shape("concat", &self.dims, &other.dims));
            }
        }
        let (outer, na, inner) = axis_extents(&self.dims, axis);
        let nb = other.dims[axis];
        let mut out = Vec::with_capacity(self.len() + other.len());
        for o in 0..outer {
            out.extend_from_slice(&self.data[o * na * inner..(o + 1) * na * inner]);
            out.extend_from_slice(&other.data[o * nb * inner..(o + 1) * nb * inner]);
        }
        let mut dims = self.dims.clone();
        dims[axis] = na + nb;
        Ok(Self { dims, data: out })
    }

    /// Elements `start..start + len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        self.check_axis("narrow", axis)?;
        if start + len > self.dims[axis] {
            return Err(Error::Shape(format!(
                "narrow: range {start}..{} exceeds axis {axis} of {:?}",
                start + len,
                self.dims
            )));
        }
        let (outer, n, inner) = axis_extents(&self.dims, axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&self.data[(o * n + start) * inner..(o * n + start + len) * inner]);
        }
        let mut dims = self.dims.clone();
        dims[axis] = len;
        Ok(Self { dims, data: out })
    }

    /// Inserts a new axis at `axis` and replicates the tensor `count` times along it.
    pub fn repeat(&self, axis: usize, count: usize) -> Result<Self> {
        if axis > self.rank() {
            return Err(Error::Shape(format!(
                "repeat: axis {axis} out of range for shape {:?}",
                self.dims
            )));
        }
        let outer: usize = self.dims[..axis].iter().product();
        let inner: usize = self.dims[axis..].iter().product();
        let mut out = Vec::with_capacity(self.len() * count);
        for o in 0..outer {
            let block = &self.data[o * inner..(o + 1) * inner];
            for _ in 0..count {
                out.extend_from_slice(block);
            }
        }
        let mut dims = self.dims.clone();
        dims.insert(axis, count);
        Ok(Self { dims, data: out })
    }

    /// Layer normalization over the last axis. Rows with zero variance
    /// normalize to exactly zero before the affine transform.
    pub fn layer_norm(&self, gamma: &Self, beta: &Self, eps: S) -> Result<Self> {
        let d = *self.dims.last().unwrap_or(&0);
        if d == 0 || gamma.dims != [d] || beta.dims != [d] {
            return Err(Error::shape("layer_norm", &self.dims, &gamma.dims));
        }
        let (xhat, _) = normalize_rows(&self.data, d, eps);
        let mut out = xhat;
        for row in out.chunks_mut(d) {
            for ((x, &g), &b) in row.iter_mut().zip(&gamma.data).zip(&beta.data) {
                *x = g * *x + b;
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: out,
        })
    }

    /// Divides each last-axis row by `sqrt(sum x^2 + eps)`.
    pub fn l2_normalize_rows(&self, eps: S) -> Result<Self> {
        let d = *self.dims.last().unwrap_or(&0);
        if d == 0 {
            return Err(Error::Shape(format!(
                "l2_normalize_rows: empty rows in {:?}",
                self.dims
            )));
        }
        let mut out = self.data.clone();
        for row in out.chunks_mut(d) {
            let n = (row.iter().fold(S::zero(), |a, &x| a + x * x) + eps).sqrt();
            for x in row.iter_mut() {
                *x = *x / n;
            }
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: out,
        })
    }

    pub fn gelu(&self) -> Self {
        self.map(gelu)
    }
}

/// Returns per-row `xhat` and reciprocal standard deviations.
pub(crate) fn normalize_rows<S: Scalar>(data: &[S], d: usize, eps: S) -> (Vec<S>, Vec<S>) {
    let inv_d = S::one() / S::of(d as f64);
    let mut xhat = Vec::with_capacity(data.len());
    let mut rstds = Vec::with_capacity(data.len() / d);
    for row in data.chunks(d) {
        let constant = row.iter().all(|&x| x == row[0]);
        let mean = row.iter().fold(S::zero(), |a, &x| a + x) * inv_d;
        let var = row
            .iter()
            .fold(S::zero(), |a, &x| a + (x - mean) * (x - mean))
            * inv_d;
        let rstd = S::one() / (var + eps).sqrt();
        rstds.push(rstd);
        for &x in row {
            xhat.push(if constant { S::zero() } else { (x - mean) * rstd });
        }
    }
    (xhat, rstds)
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub(crate) fn gelu<S: Scalar>(x: S) -> S {
    let k = S::of(GELU_K);
    let c = S::of(GELU_C);
    let half = S::of(0.5);
    half * x * (S::one() + (k * (x + c * x * x * x)).tanh())
}

pub(crate) fn gelu_derivative<S: Scalar>(x: S) -> S {
    let k = S::of(GELU_K);
    let c = S::of(GELU_C);
    let half = S::of(0.5);
    let u = k * (x + c * x * x * x);
    let th = u.tanh();
    let du = k * (S::one() + S::of(3.0) * c * x * x);
    half * (S::one() + th) + half * x * (S::one() - th * th) * du
}

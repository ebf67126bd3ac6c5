//! Reverse-mode differentiation over a linear operation tape.
//!
//! A [`Graph`] records every op in execution order; [`Graph::backward`]
//! walks the tape once in reverse and accumulates gradients in tape order,
//! so repeated runs are bit-identical. The graph also tallies analytic
//! forward FLOPs per named scope.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamId;
use crate::tensor::{axis_extents, gelu_derivative, normalize_rows, Scalar, Tensor};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    AddBias(Var, Var),
    ScaleBy { x: Var, s: Var, idx: usize },
    Softmax { x: Var, axis: usize },
    LogSoftmax { x: Var, axis: usize },
    Mean { x: Var, axis: usize },
    SumAll(Var),
    Concat { a: Var, b: Var, axis: usize },
    Narrow { x: Var, axis: usize, start: usize, len: usize },
    Reshape(Var),
    Transpose(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, eps: S },
    Gelu(Var),
    Repeat { x: Var, axis: usize, count: usize },
    L2Normalize { x: Var, eps: S },
}

#[derive(Clone, Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    param_nodes: Vec<(ParamId, Var)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of `var`, or `None` when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor<S>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient for every bound parameter, indexed by `ParamId`; parameters
    /// unreachable from the loss get zeros. `shapes` gives each parameter's dims.
    pub fn for_params(&self, shapes: &[Vec<usize>]) -> Vec<Tensor<S>> {
        let mut out: Vec<Tensor<S>> = shapes.iter().map(|d| Tensor::zeros(d)).collect();
        for &(pid, var) in &self.param_nodes {
            if let Some(g) = self.get(var) {
                let slot = &mut out[pid.index()];
                for (acc, &x) in slot.data_mut().iter_mut().zip(g.data()) {
                    *acc = *acc + x;
                }
            }
        }
        out
    }
}

/// Operation tape.
#[derive(Clone, Debug)]
pub struct Graph<S: Scalar = f32> {
    nodes: Vec<Node<S>>,
    scope: &'static str,
    flops: BTreeMap<&'static str, u64>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            scope: "other",
            flops: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    /// Sets the FLOP-accounting scope for subsequently recorded ops and
    /// returns the previous one.
    pub fn set_scope(&mut self, scope: &'static str) -> &'static str {
        std::mem::replace(&mut self.scope, scope)
    }

    /// Forward FLOPs tallied per scope.
    pub fn flops(&self) -> &BTreeMap<&'static str, u64> {
        &self.flops
    }

    pub fn total_flops(&self) -> u64 {
        self.flops.values().sum()
    }

    /// A differentiable input that is not a model parameter.
    pub fn input(&mut self, value: Tensor<S>) -> Var {
        self.push_leaf(value, true, None)
    }

    /// A non-differentiable input; no gradient is ever computed for it.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push_leaf(value, false, None)
    }

    /// A trainable parameter leaf.
    pub fn param(&mut self, id: ParamId, value: Tensor<S>) -> Var {
        self.push_leaf(value, true, Some(id))
    }

    fn push_leaf(&mut self, value: Tensor<S>, requires_grad: bool, param: Option<ParamId>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            param,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>, flops: u64) -> Var {
        let requires_grad = op_inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad);
        *self.flops.entry(self.scope).or_insert(0) += flops;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let (m, k) = (self.dims(a)[0], self.dims(a)[1]);
        let p = self.dims(b)[1];
        Ok(self.push(Op::MatMul(a, b), out, 2 * (m * k * p) as u64))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let n = out.len() as u64;
        Ok(self.push(Op::Add(a, b), out, n))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        let n = out.len() as u64;
        Ok(self.push(Op::Sub(a, b), out, n))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).mul(self.value(b))?;
        let n = out.len() as u64;
        Ok(self.push(Op::Mul(a, b), out, n))
    }

    pub fn scale(&mut self, x: Var, s: S) -> Var {
        let out = self.value(x).scale(s);
        let n = out.len() as u64;
        self.push(Op::Scale(x, s), out, n)
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let out = self.value(x).add_bias(self.value(bias))?;
        let n = out.len() as u64;
        Ok(self.push(Op::AddBias(x, bias), out, n))
    }

    /// `x * s[idx]` where `s` is a rank-1 tensor of scalars.
    pub fn scale_by(&mut self, x: Var, s: Var, idx: usize) -> Result<Var> {
        let sv = self.value(s);
        if sv.rank() != 1 || idx >= sv.len() {
            return Err(Error::Shape(format!(
                "scale_by: index {idx} invalid for scalar bank {:?}",
                sv.dims()
            )));
        }
        let k = sv.data()[idx];
        let out = self.value(x).scale(k);
        let n = out.len() as u64;
        Ok(self.push(Op::ScaleBy { x, s, idx }, out, n))
    }

    /// Affine map `x W + b` over the last axis of a rank-2 input.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, weight)?;
        match bias {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = self.value(x).softmax(axis)?;
        let n = out.len() as u64;
        Ok(self.push(Op::Softmax { x, axis }, out, 4 * n))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = self.value(x).log_softmax(axis)?;
        let n = out.len() as u64;
        Ok(self.push(Op::LogSoftmax { x, axis }, out, 4 * n))
    }

    pub fn mean_along(&mut self, x: Var, axis: usize) -> Result<Var> {
        let out = self.value(x).mean_along(axis)?;
        let n = self.value(x).len() as u64;
        let m = out.len() as u64;
        Ok(self.push(Op::Mean { x, axis }, out, n + m))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum_all());
        let n = self.value(x).len() as u64;
        self.push(Op::SumAll(x), out, n)
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let out = self.value(a).concat(self.value(b), axis)?;
        Ok(self.push(Op::Concat { a, b, axis }, out, 0))
    }

    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let out = self.value(x).narrow(axis, start, len)?;
        Ok(self.push(Op::Narrow { x, axis, start, len }, out, 0))
    }

    pub fn reshape(&mut self, x: Var, dims: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(dims)?;
        Ok(self.push(Op::Reshape(x), out, 0))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        Ok(self.push(Op::Transpose(x), out, 0))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: S) -> Result<Var> {
        let out = self.value(x).layer_norm(self.value(gamma), self.value(beta), eps)?;
        let n = out.len() as u64;
        Ok(self.push(Op::LayerNorm { x, gamma, beta, eps }, out, 8 * n))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).gelu();
        let n = out.len() as u64;
        self.push(Op::Gelu(x), out, 8 * n)
    }

    /// Inserts axis `axis` of size `count`, replicating the input along it.
    pub fn repeat(&mut self, x: Var, axis: usize, count: usize) -> Result<Var> {
        let out = self.value(x).repeat(axis, count)?;
        Ok(self.push(Op::Repeat { x, axis, count }, out, 0))
    }

    pub fn l2_normalize_rows(&mut self, x: Var, eps: S) -> Result<Var> {
        let out = self.value(x).l2_normalize_rows(eps)?;
        let n = out.len() as u64;
        Ok(self.push(Op::L2Normalize { x, eps }, out, 3 * n))
    }

    /// Recomputes every node from its recorded inputs and reports whether
    /// all values are bit-identical to the recorded ones.
    pub fn replay(&self) -> Result<bool> {
        for node in &self.nodes {
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let v = |x: &Var| &self.nodes[x.0].value;
            let again = match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => v(a).matmul(v(b))?,
                Op::Add(a, b) => v(a).add(v(b))?,
                Op::Sub(a, b) => v(a).sub(v(b))?,
                Op::Mul(a, b) => v(a).mul(v(b))?,
                Op::Scale(x, s) => v(x).scale(*s),
                Op::AddBias(x, b) => v(x).add_bias(v(b))?,
                Op::ScaleBy { x, s, idx } => v(x).scale(v(s).data()[*idx]),
                Op::Softmax { x, axis } => v(x).softmax(*axis)?,
                Op::LogSoftmax { x, axis } => v(x).log_softmax(*axis)?,
                Op::Mean { x, axis } => v(x).mean_along(*axis)?,
                Op::SumAll(x) => Tensor::scalar(v(x).sum_all()),
                Op::Concat { a, b, axis } => v(a).concat(v(b), *axis)?,
                Op::Narrow { x, axis, start, len } => v(x).narrow(*axis, *start, *len)?,
                Op::Reshape(x) => v(x).reshape(node.value.dims())?,
                Op::Transpose(x) => v(x).transpose()?,
                Op::LayerNorm { x, gamma, beta, eps } => v(x).layer_norm(v(gamma), v(beta), *eps)?,
                Op::Gelu(x) => v(x).gelu(),
                Op::Repeat { x, axis, count } => v(x).repeat(*axis, *count)?,
                Op::L2Normalize { x, eps } => v(x).l2_normalize_rows(*eps)?,
            };
            let same = again.dims() == node.value.dims()
                && again
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .all(|(a, b)| a.f64().to_bits() == b.f64().to_bits());
            if !same {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Backpropagates from a scalar `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward seed must be scalar, got shape {:?}",
                self.dims(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(self.dims(loss).to_vec(), vec![S::one()])?);

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let contributions = self.vjp(node, &gy)?;
            for (var, g) in contributions {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                accumulate(&mut grads[var.0], g)?;
            }
            grads[idx] = Some(gy);
        }

        let param_nodes = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (p, Var(i))))
            .collect();
        Ok(Gradients { grads, param_nodes })
    }

    /// Vector-Jacobian products of one node with respect to its inputs.
    fn vjp(&self, node: &Node<S>, gy: &Tensor<S>) -> Result<Vec<(Var, Tensor<S>)>> {
        let v = |x: &Var| &self.nodes[x.0].value;
        let y = &node.value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let ga = gy.matmul(&v(b).transpose()?)?;
                let gb = v(a).transpose()?.matmul(gy)?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::Add(a, b) => vec![(*a, gy.clone()), (*b, gy.clone())],
            Op::Sub(a, b) => vec![(*a, gy.clone()), (*b, gy.scale(-S::one()))],
            Op::Mul(a, b) => vec![(*a, gy.mul(v(b))?), (*b, gy.mul(v(a))?)],
            Op::Scale(x, s) => vec![(*x, gy.scale(*s))],
            Op::AddBias(x, b) => {
                let d = v(b).len();
                let rows = gy.len() / d.max(1);
                let gb = gy.reshape(&[rows, d])?.sum_along(0)?;
                vec![(*x, gy.clone()), (*b, gb)]
            }
            Op::ScaleBy { x, s, idx } => {
                let k = v(s).data()[*idx];
                let mut gs = Tensor::zeros(v(s).dims());
                gs.data_mut()[*idx] = gy.dot(v(x))?;
                vec![(*x, gy.scale(k)), (*s, gs)]
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = axis_extents(y.dims(), *axis);
                let mut gx = gy.clone();
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * n + j) * inner + i;
                        let dot = (0..n).fold(S::zero(), |acc, j| acc + gy.data()[at(j)] * y.data()[at(j)]);
                        for j in 0..n {
                            gx.data_mut()[at(j)] = y.data()[at(j)] * (gy.data()[at(j)] - dot);
                        }
                    }
                }
                vec![(*x, gx)]
            }
            Op::LogSoftmax { x, axis } => {
                let (outer, n, inner) = axis_extents(y.dims(), *axis);
                let mut gx = gy.clone();
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * n + j) * inner + i;
                        let total = (0..n).fold(S::zero(), |acc, j| acc + gy.data()[at(j)]);
                        for j in 0..n {
                            gx.data_mut()[at(j)] = gy.data()[at(j)] - y.data()[at(j)].exp() * total;
                        }
                    }
                }
                vec![(*x, gx)]
            }
            Op::Mean { x, axis } => {
                let n = v(x).dims()[*axis];
                let inv = S::one() / S::of(n as f64);
                let mut kept = v(x).dims().to_vec();
                kept[*axis] = 1;
                let g = gy.reshape(&kept)?;
                let gx = expand_axis(&g, *axis, n).scale(inv);
                vec![(*x, gx)]
            }
            Op::SumAll(x) => vec![(*x, Tensor::full(v(x).dims(), gy.data()[0]))],
            Op::Concat { a, b, axis } => {
                let na = v(a).dims()[*axis];
                let nb = v(b).dims()[*axis];
                vec![
                    (*a, gy.narrow(*axis, 0, na)?),
                    (*b, gy.narrow(*axis, na, nb)?),
                ]
            }
            Op::Narrow { x, axis, start, len } => {
                let xd = v(x).dims();
                let (outer, n, inner) = axis_extents(xd, *axis);
                let mut gx = Tensor::zeros(xd);
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    let src = o * len * inner;
                    gx.data_mut()[dst..dst + len * inner]
                        .copy_from_slice(&gy.data()[src..src + len * inner]);
                }
                vec![(*x, gx)]
            }
            Op::Reshape(x) => vec![(*x, gy.reshape(v(x).dims())?)],
            Op::Transpose(x) => vec![(*x, gy.transpose()?)],
            Op::LayerNorm { x, gamma, beta, eps } => {
                let d = v(gamma).len();
                let (xhat, rstds) = normalize_rows(v(x).data(), d, *eps);
                let g = v(gamma).data();
                let mut gx = vec![S::zero(); xhat.len()];
                let mut ggamma = vec![S::zero(); d];
                let mut gbeta = vec![S::zero(); d];
                let inv_d = S::one() / S::of(d as f64);
                for (r, rstd) in rstds.iter().enumerate() {
                    let rows = r * d..(r + 1) * d;
                    let dy = &gy.data()[rows.clone()];
                    let xh = &xhat[rows.clone()];
                    let mut mean_dxh = S::zero();
                    let mut mean_dxh_xh = S::zero();
                    for j in 0..d {
                        ggamma[j] = ggamma[j] + dy[j] * xh[j];
                        gbeta[j] = gbeta[j] + dy[j];
                        let dxh = dy[j] * g[j];
                        mean_dxh = mean_dxh + dxh;
                        mean_dxh_xh = mean_dxh_xh + dxh * xh[j];
                    }
                    mean_dxh = mean_dxh * inv_d;
                    mean_dxh_xh = mean_dxh_xh * inv_d;
                    for j in 0..d {
                        let dxh = dy[j] * g[j];
                        gx[r * d + j] = *rstd * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
                vec![
                    (*x, Tensor::new(v(x).dims().to_vec(), gx)?),
                    (*gamma, Tensor::new(vec![d], ggamma)?),
                    (*beta, Tensor::new(vec![d], gbeta)?),
                ]
            }
            Op::Gelu(x) => {
                let gx = gy.zip_map(v(x), "gelu", |g, xv| g * gelu_derivative(xv))?;
                vec![(*x, gx)]
            }
            Op::Repeat { x, axis, .. } => vec![(*x, gy.sum_along(*axis)?.reshape(v(x).dims())?)],
            Op::L2Normalize { x, eps } => {
                let d = *y.dims().last().unwrap();
                let mut gx = gy.clone();
                for ((gxr, yr), xr) in gx
                    .data_mut()
                    .chunks_mut(d)
                    .zip(y.data().chunks(d))
                    .zip(v(x).data().chunks(d))
                {
                    let n = (xr.iter().fold(S::zero(), |a, &t| a + t * t) + *eps).sqrt();
                    let dot = gxr.iter().zip(yr).fold(S::zero(), |a, (&g, &yy)| a + g * yy);
                    for (g, &yy) in gxr.iter_mut().zip(yr) {
                        *g = (*g - yy * dot) / n;
                    }
                }
                vec![(*x, gx)]
            }
        })
    }
}

fn op_inputs<S>(op: &Op<S>) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddBias(a, b) => {
            vec![*a, *b]
        }
        Op::Concat { a, b, .. } => vec![*a, *b],
        Op::ScaleBy { x, s, .. } => vec![*x, *s],
        Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
        Op::Scale(x, _)
        | Op::Softmax { x, .. }
        | Op::LogSoftmax { x, .. }
        | Op::Mean { x, .. }
        | Op::SumAll(x)
        | Op::Narrow { x, .. }
        | Op::Reshape(x)
        | Op::Transpose(x)
        | Op::Gelu(x)
        | Op::Repeat { x, .. }
        | Op::L2Normalize { x, .. } => vec![*x],
    }
}

fn accumulate<S: Scalar>(slot: &mut Option<Tensor<S>>, g: Tensor<S>) -> Result<()> {
    match slot {
        Some(acc) => *acc = acc.add(&g)?,
        None => *slot = Some(g),
    }
    Ok(())
}

/// Replicates a size-1 axis `count` times.
fn expand_axis<S: Scalar>(t: &Tensor<S>, axis: usize, count: usize) -> Tensor<S> {
    let (outer, _, inner) = axis_extents(t.dims(), axis);
    let mut data = Vec::with_capacity(t.len() * count);
    for o in 0..outer {
        let block = &t.data()[o * inner..(o + 1) * inner];
        for _ in 0..count {
            data.extend_from_slice(block);
        }
    }
    let mut dims = t.dims().to_vec();
    dims[axis] = count;
    Tensor::new(dims, data).expect("expand_axis preserves element count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_two_x() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        let sq = g.mul(x, x).unwrap();
        let loss = g.sum_all(sq);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn constant_loss_gives_zero_param_gradients() {
        let mut g = Graph::<f32>::new();
        let p = g.param(ParamId::new(0), Tensor::ones(&[2]));
        let c = g.constant(Tensor::full(&[2], 3.0));
        let loss = g.sum_all(c);
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(p).is_none());
        let per_param = grads.for_params(&[vec![2]]);
        assert_eq!(per_param[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_seed_is_a_contract_error() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::ones(&[2]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn replay_is_bit_exact() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::from_fn(&[2, 3], |i| i as f32 * 0.37 - 0.5));
        let w = g.input(Tensor::from_fn(&[3, 3], |i| (i as f32).sin()));
        let y = g.matmul(x, w).unwrap();
        let s = g.softmax(y, 1).unwrap();
        let l = g.gelu(s);
        let _ = g.sum_all(l);
        assert!(g.replay().unwrap());
    }

    #[test]
    fn flops_are_tallied_by_scope() {
        let mut g = Graph::<f32>::new();
        let a = g.constant(Tensor::ones(&[2, 3]));
        let b = g.constant(Tensor::ones(&[3, 4]));
        g.set_scope("proj");
        g.matmul(a, b).unwrap();
        assert_eq!(g.flops()["proj"], 2 * 2 * 3 * 4);
    }
}

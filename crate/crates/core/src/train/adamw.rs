use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl AdamW {
    pub fn new(params: &ParamStore, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| Tensor::zeros(t.dims())).collect();
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
            m: zeros(),
            v: zeros(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Updates the parameters in `trainable` from `grads` (indexed by
    /// `ParamId`). A non-finite gradient rejects the whole step before any
    /// parameter or moment changes.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor], trainable: &[ParamId], lr: f64) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer state for {} parameters, store has {}, got {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for &id in trainable {
            if grads[id.index()].dims() != params.get(id).dims() {
                return Err(Error::shape(params.name(id), grads[id.index()].dims(), params.get(id).dims()));
            }
            if !grads[id.index()].all_finite() {
                return Err(Error::NonFiniteGradient {
                    param: params.name(id).to_string(),
                });
            }
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - lr * self.weight_decay;
        let (b1, b2) = (self.beta1, self.beta2);
        for &id in trainable {
            let i = id.index();
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, p) in params.get_mut(id).data_mut().iter_mut().enumerate() {
                let gk = g[k] as f64;
                let mk = b1 * m[k] as f64 + (1.0 - b1) * gk;
                let vk = b2 * v[k] as f64 + (1.0 - b2) * gk * gk;
                m[k] = mk as f32;
                v[k] = vk as f32;
                let update = (mk / c1) / ((vk / c2).sqrt() + self.eps);
                *p = (*p as f64 * decay - lr * update) as f32;
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Tensor], ids: &[ParamId], max_norm: f64) {
    let sq: f64 = ids
        .iter()
        .flat_map(|id| grads[id.index()].data())
        .map(|&x| (x as f64) * (x as f64))
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = (max_norm / norm) as f32;
        for id in ids {
            grads[id.index()] = grads[id.index()].scale(s);
        }
    }
}

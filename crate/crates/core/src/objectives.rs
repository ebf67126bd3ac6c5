//! Losses for both stages: contrastive alignment of processor outputs with
//! text embeddings, and label-smoothed cross-entropy with mixup.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Probabilities are clamped from below before the log.
pub const PROB_FLOOR: f64 = 1e-6;

/// Added under the square root when normalizing embeddings.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoNce {
    pub temperature: f64,
    /// Average the visual-to-text and text-to-visual directions; when false
    /// only the visual-to-text rows count.
    pub symmetric: bool,
}

impl Default for InfoNce {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            symmetric: true,
        }
    }
}

impl InfoNce {
    fn check(&self, visual: &[usize], text: &[usize]) -> Result<()> {
        if visual.len() != 2 || visual != text {
            return Err(Error::shape("info_nce", visual, text));
        }
        if visual[0] < 2 {
            return Err(Error::Contract(format!(
                "info_nce needs at least 2 pairs for negatives, got {}",
                visual[0]
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Contract(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Loss for row-aligned banks `[B, L]`: row `j` of `visual` pairs with
    /// row `j` of `text`. Rows are L2-normalized internally.
    pub fn loss<S: Scalar>(&self, visual: &Tensor<S>, text: &Tensor<S>) -> Result<S> {
        self.check(visual.dims(), text.dims())?;
        let eps = S::of(NORM_EPS);
        let v = visual.l2_normalize_rows(eps)?;
        let e = text.l2_normalize_rows(eps)?;
        let s = v.matmul(&e.transpose()?)?.scale(S::of(1.0 / self.temperature));
        let b = visual.dims()[0];
        let diag = |ls: &Tensor<S>| (0..b).map(|j| ls.data()[j * b + j]).sum::<S>();
        let rows = diag(&s.log_softmax(1)?);
        let total = if self.symmetric {
            S::of(0.5) * (rows + diag(&s.log_softmax(0)?))
        } else {
            rows
        };
        Ok(-total / S::of(b as f64))
    }

    /// Same loss on the tape.
    pub fn loss_graph<S: Scalar>(&self, g: &mut Graph<S>, visual: Var, text: Var) -> Result<Var> {
        self.check(g.dims(visual), g.dims(text))?;
        let b = g.dims(visual)[0];
        let eps = S::of(NORM_EPS);
        let v = g.l2_normalize_rows(visual, eps)?;
        let e = g.l2_normalize_rows(text, eps)?;
        let et = g.transpose(e)?;
        let s = g.matmul(v, et)?;
        let s = g.scale(s, S::of(1.0 / self.temperature));
        let eye = g.constant(Tensor::identity(b));
        let rows = g.log_softmax(s, 1)?;
        let rows = g.mul(rows, eye)?;
        let mut total = g.sum_all(rows);
        let mut weight = 1.0;
        if self.symmetric {
            let cols = g.log_softmax(s, 0)?;
            let cols = g.mul(cols, eye)?;
            let cols = g.sum_all(cols);
            total = g.add(total, cols)?;
            weight = 0.5;
        }
        Ok(g.scale(total, S::of(-weight / b as f64)))
    }
}

/// `(1 - eps) * onehot + eps / C` per row.
pub fn smoothed_targets<S: Scalar>(labels: &[usize], classes: usize, eps: f64) -> Result<Tensor<S>> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Contract(format!("label smoothing must be in [0, 1), got {eps}")));
    }
    let mut t = Tensor::full(&[labels.len(), classes], S::of(eps / classes as f64));
    for (j, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Contract(format!("label {y} out of range for {classes} classes")));
        }
        t.data_mut()[j * classes + y] = S::of(1.0 - eps + eps / classes as f64);
    }
    Ok(t)
}

/// `-mean_j sum_c target[j, c] * ln max(probs[j, c], PROB_FLOOR)`.
pub fn cross_entropy_smoothed<S: Scalar>(probs: &Tensor<S>, labels: &[usize], eps: f64) -> Result<S> {
    if probs.rank() != 2 || probs.dims()[0] != labels.len() {
        return Err(Error::shape("cross_entropy_smoothed", probs.dims(), &[labels.len()]));
    }
    let target = smoothed_targets::<S>(labels, probs.dims()[1], eps)?;
    soft_cross_entropy(probs, &target)
}

/// Cross-entropy against arbitrary row-stochastic targets.
pub fn soft_cross_entropy<S: Scalar>(probs: &Tensor<S>, target: &Tensor<S>) -> Result<S> {
    if probs.dims() != target.dims() || probs.rank() != 2 {
        return Err(Error::shape("soft_cross_entropy", probs.dims(), target.dims()));
    }
    let floor = S::of(PROB_FLOOR);
    let total: S = probs
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| t * p.max(floor).ln())
        .sum();
    Ok(-total / S::of(probs.dims()[0] as f64))
}

/// Cross-entropy of `logits [B, C]` against `target [B, C]` on the tape,
/// through a log-softmax (no clamp is needed there).
pub fn soft_cross_entropy_graph<S: Scalar>(g: &mut Graph<S>, logits: Var, target: &Tensor<S>) -> Result<Var> {
    if g.dims(logits) != target.dims() || target.rank() != 2 {
        return Err(Error::shape("soft_cross_entropy", g.dims(logits), target.dims()));
    }
    let b = target.dims()[0];
    let ls = g.log_softmax(logits, 1)?;
    let t = g.constant(target.clone());
    let weighted = g.mul(ls, t)?;
    let total = g.sum_all(weighted);
    Ok(g.scale(total, S::of(-1.0 / b as f64)))
}

/// One mixup draw: sample `j` becomes `lambda * x_j + (1 - lambda) * x_perm[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixupDraw {
    pub lambda: f64,
    pub perm: Vec<usize>,
}

impl MixupDraw {
    pub fn identity(n: usize) -> Self {
        Self {
            lambda: 1.0,
            perm: (0..n).collect(),
        }
    }

    /// `alpha = 0` disables mixing. Otherwise `lambda ~ Beta(alpha, alpha)`
    /// and the pairing is a uniform permutation (fixed points allowed).
    pub fn sample<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<Self> {
        if alpha == 0.0 {
            return Ok(Self::identity(n));
        }
        let beta = Beta::new(alpha, alpha)
            .map_err(|e| Error::Contract(format!("mixup alpha {alpha}: {e}")))?;
        let lambda = beta.sample(rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Ok(Self { lambda, perm })
    }

    pub fn mix_inputs<S: Scalar>(&self, xs: &[Tensor<S>]) -> Result<Vec<Tensor<S>>> {
        if xs.len() != self.perm.len() {
            return Err(Error::Contract(format!(
                "mixup drawn for {} samples, got {}",
                self.perm.len(),
                xs.len()
            )));
        }
        if self.lambda == 1.0 {
            return Ok(xs.to_vec());
        }
        let l = S::of(self.lambda);
        let r = S::of(1.0 - self.lambda);
        xs.iter()
            .zip(&self.perm)
            .map(|(x, &p)| x.zip_map(&xs[p], "mixup", |a, b| l * a + r * b))
            .collect()
    }

    /// `lambda * t_j + (1 - lambda) * t_perm[j]`: training on this target is
    /// the same as weighting the two cross-entropies, since the loss is
    /// linear in its target.
    pub fn mix_targets<S: Scalar>(&self, target: &Tensor<S>) -> Result<Tensor<S>> {
        let [n, c] = [target.dims()[0], target.dims()[1]];
        if n != self.perm.len() {
            return Err(Error::shape("mixup targets", target.dims(), &[self.perm.len(), c]));
        }
        let (l, r) = (S::of(self.lambda), S::of(1.0 - self.lambda));
        let t = target.data();
        Ok(Tensor::from_fn(&[n, c], |i| {
            let (j, k) = (i / c, i % c);
            l * t[j * c + k] + r * t[self.perm[j] * c + k]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad, relative_error};
    use crate::rng;

    #[test]
    fn identical_embeddings_give_ln_b() {
        for b in [2usize, 4, 7] {
            let x = Tensor::<f64>::from_fn(&[b, 6], |i| (i % 6) as f64 - 2.0);
            let l = InfoNce::default().loss(&x, &x).unwrap();
            assert!((l - (b as f64).ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn orthonormal_pairs_match_closed_form() {
        let x = Tensor::<f64>::identity(4);
        let l = InfoNce::default().loss(&x, &x).unwrap();
        let expect = (1.0 + 3.0 * (-1.0f64 / 0.07).exp()).ln();
        assert!((l - expect).abs() < 1e-6, "{l} vs {expect}");
        let g = {
            let mut g = Graph::<f64>::new();
            let v = g.input(x.clone());
            let e = g.constant(x.clone());
            let loss = InfoNce::default().loss_graph(&mut g, v, e).unwrap();
            g.value(loss).data()[0]
        };
        assert!((g - expect).abs() < 1e-6);
    }

    #[test]
    fn needs_two_pairs() {
        let x = Tensor::<f64>::ones(&[1, 3]);
        assert!(matches!(InfoNce::default().loss(&x, &x), Err(Error::Contract(_))));
        let bad = InfoNce {
            temperature: 0.0,
            ..Default::default()
        };
        let y = Tensor::<f64>::ones(&[2, 3]);
        assert!(matches!(bad.loss(&y, &y), Err(Error::Contract(_))));
    }

    #[test]
    fn swapping_banks_and_rotation_leave_loss_unchanged() {
        let mut r = rng::stream(3, &[1]);
        let v = Tensor::<f64>::randn(&[5, 4], 1.0, &mut r);
        let e = Tensor::<f64>::randn(&[5, 4], 1.0, &mut r);
        let nce = InfoNce::default();
        let a = nce.loss(&v, &e).unwrap();
        assert!((a - nce.loss(&e, &v).unwrap()).abs() < 1e-12);
        let (c, s) = (0.6f64, 0.8f64);
        let rot = Tensor::new(
            vec![4, 4],
            vec![c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let b = nce.loss(&v.matmul(&rot).unwrap(), &e.matmul(&rot).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(a >= 0.0);
    }

    #[test]
    fn raising_diagonal_similarity_lowers_loss() {
        let mut r = rng::stream(4, &[1]);
        let e = Tensor::<f64>::randn(&[4, 6], 1.0, &mut r);
        let v = Tensor::<f64>::randn(&[4, 6], 1.0, &mut r);
        let nce = InfoNce::default();
        let mut prev = nce.loss(&v, &e).unwrap();
        for step in 1..=5 {
            let w = step as f64 / 5.0;
            let mixed = v.zip_map(&e, "t", |a, b| (1.0 - w) * a + w * b).unwrap();
            let now = nce.loss(&mixed, &e).unwrap();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn info_nce_gradient_matches_finite_differences() {
        let mut r = rng::stream(5, &[1]);
        let v = Tensor::<f64>::randn(&[3, 5], 1.0, &mut r);
        let e = Tensor::<f64>::randn(&[3, 5], 1.0, &mut r);
        for symmetric in [true, false] {
            let nce = InfoNce {
                temperature: 0.5,
                symmetric,
            };
            let mut g = Graph::<f64>::new();
            let vv = g.input(v.clone());
            let ev = g.input(e.clone());
            let loss = nce.loss_graph(&mut g, vv, ev).unwrap();
            let grads = g.backward(loss).unwrap();
            let fv = finite_diff_grad(|x| nce.loss(x, &e).unwrap(), &v, 1e-5);
            let fe = finite_diff_grad(|x| nce.loss(&v, x).unwrap(), &e, 1e-5);
            assert!(relative_error(grads.get(vv).unwrap(), &fv) < 1e-6);
            assert!(relative_error(grads.get(ev).unwrap(), &fe) < 1e-6);
        }
    }

    #[test]
    fn uniform_probabilities_give_ln_c() {
        for eps in [0.0, 0.1, 0.5] {
            let p = Tensor::<f64>::full(&[3, 10], 0.1);
            let l = cross_entropy_smoothed(&p, &[0, 4, 9], eps).unwrap();
            assert!((l - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let mut p = Tensor::<f64>::full(&[1, 10], 1e-6 / 9.0);
        p.data_mut()[3] = 1.0 - 1e-6;
        assert!(cross_entropy_smoothed(&p, &[3], 0.0).unwrap() <= 1e-5);
    }

    #[test]
    fn smoothed_one_hot_against_hand_sum() {
        let mut p = Tensor::<f64>::zeros(&[1, 10]);
        p.data_mut()[2] = 1.0;
        let l = cross_entropy_smoothed(&p, &[2], 0.1).unwrap();
        // nine off-label classes at target 0.01 hit the floor; the label
        // class has ln 1 = 0
        let mut hand = 0.0;
        for _ in 0..9 {
            hand += 0.01 * -(1e-6f64).ln();
        }
        assert!((l - hand).abs() < 1e-12, "{l} vs {hand}");
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let p = Tensor::<f64>::full(&[1, 3], 1.0 / 3.0);
        assert!(matches!(cross_entropy_smoothed(&p, &[3], 0.1), Err(Error::Contract(_))));
    }

    #[test]
    fn graph_cross_entropy_matches_plain_and_finite_differences() {
        let mut r = rng::stream(6, &[1]);
        let logits = Tensor::<f64>::randn(&[3, 4], 1.0, &mut r);
        let target = smoothed_targets::<f64>(&[0, 3, 1], 4, 0.1).unwrap();
        let plain = |z: &Tensor<f64>| soft_cross_entropy(&z.softmax(1).unwrap(), &target).unwrap();
        let mut g = Graph::<f64>::new();
        let z = g.input(logits.clone());
        let loss = soft_cross_entropy_graph(&mut g, z, &target).unwrap();
        assert!((g.value(loss).data()[0] - plain(&logits)).abs() < 1e-12);
        let grads = g.backward(loss).unwrap();
        let fd = finite_diff_grad(plain, &logits, 1e-5);
        assert!(relative_error(grads.get(z).unwrap(), &fd) < 1e-6);
    }

    #[test]
    fn mixup_disabled_is_identity() {
        let mut r = rng::stream(1, &[1]);
        let d = MixupDraw::sample(4, 0.0, &mut r).unwrap();
        assert_eq!(d, MixupDraw::identity(4));
        let xs: Vec<Tensor> = (0..4).map(|i| Tensor::full(&[2], i as f32)).collect();
        assert_eq!(d.mix_inputs(&xs).unwrap(), xs);
    }

    #[test]
    fn mixup_recomputes_elementwise() {
        let mut r = rng::stream(2, &[1]);
        let d = MixupDraw::sample(5, 0.8, &mut r).unwrap();
        assert!((0.0..=1.0).contains(&d.lambda));
        let mut sorted = d.perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..5).collect::<Vec<_>>());
        let xs: Vec<Tensor<f64>> = (0..5).map(|i| Tensor::randn(&[3], 1.0, &mut r).scale(i as f64)).collect();
        let mixed = d.mix_inputs(&xs).unwrap();
        for j in 0..5 {
            for k in 0..3 {
                let want = d.lambda * xs[j].data()[k] + (1.0 - d.lambda) * xs[d.perm[j]].data()[k];
                assert!((mixed[j].data()[k] - want).abs() < 1e-15);
            }
        }
        let t = smoothed_targets::<f64>(&[0, 1, 2, 0, 1], 3, 0.0).unwrap();
        let mt = d.mix_targets(&t).unwrap();
        for row in mt.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_one_is_identity_mixing() {
        let d = MixupDraw {
            lambda: 1.0,
            perm: vec![1, 0],
        };
        let xs = vec![Tensor::full(&[2], 1.0f32), Tensor::full(&[2], 2.0)];
        assert_eq!(d.mix_inputs(&xs).unwrap(), xs);
    }
}

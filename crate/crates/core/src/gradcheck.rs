//! Central finite differences, the independent oracle for `Graph::backward`.

use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::model::{FtpModel, ModelConfig};
use crate::objectives::{smoothed_targets, soft_cross_entropy_graph, InfoNce};
use crate::prompt::{Prompt, PromptSet};
use crate::rng;
use crate::tensor::Tensor;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor<f64>, step: f64) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.dims());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// `|a - b|_2 / max(|a|_2, |b|_2)`, with both-zero treated as exact agreement.
pub fn relative_error(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.dims(), b.dims(), "relative_error: shape mismatch");
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.l2_norm().max(b.l2_norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Step used by the finite-difference checks below.
pub const STEP: f64 = 1e-5;

fn probe_weights(dims: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(dims, |i| (0.7 * i as f64 + 0.3).sin() + 0.2)
}

/// Largest relative error, over all inputs, between `backward` and finite
/// differences for `sum(build(inputs) * W)` with a fixed non-constant `W`.
/// The weighting keeps ops such as softmax, whose plain sum is constant,
/// from passing trivially.
pub fn check_graph<F>(inputs: &[Tensor<f64>], build: F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<f64>], track: bool| -> Result<(Graph<f64>, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs
            .iter()
            .map(|x| if track { g.input(x.clone()) } else { g.constant(x.clone()) })
            .collect();
        let y = build(&mut g, &vars)?;
        let w = g.constant(probe_weights(g.dims(y)));
        let yw = g.mul(y, w)?;
        let loss = g.sum_all(yw);
        Ok((g, vars, loss))
    };
    let (g, vars, loss) = eval(inputs, true)?;
    let grads = g.backward(loss)?;
    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).cloned().unwrap_or_else(|| Tensor::zeros(x.dims()));
        let mut xs = inputs.to_vec();
        let numeric = finite_diff_grad(
            |probe| {
                xs[i] = probe.clone();
                let (g, _, loss) = eval(&xs, false).expect("forward succeeded on the unperturbed input");
                g.value(loss).data()[0]
            },
            x,
            STEP,
        );
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn randn(dims: &[usize], seed: u64, salt: u64) -> Tensor<f64> {
    let mut r = rng::stream(seed, &[0x6772_6164, salt]);
    Tensor::<f32>::randn(dims, 1.0, &mut r).cast()
}

/// Relative error of every differentiable tensor op, by name.
pub fn op_suite(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let a = randn(&[3, 4], seed, 1);
    let b = randn(&[3, 4], seed, 2);
    let w = randn(&[4, 5], seed, 3);
    let bias = randn(&[4], seed, 4);
    let bias5 = randn(&[5], seed, 5);
    let s = randn(&[3], seed, 6);
    let cube = randn(&[2, 3, 4], seed, 7);
    let gamma = randn(&[4], seed, 8);
    let pos = Tensor::from_fn(&[3, 4], |i| 0.5 + 0.1 * i as f64);
    let mut out = Vec::new();
    macro_rules! case {
        ($name:expr, $inputs:expr, $body:expr) => {
            out.push(($name, check_graph(&$inputs, $body)?));
        };
    }
    case!("matmul", [a.clone(), w.clone()], |g, v| g.matmul(v[0], v[1]));
    case!("add", [a.clone(), b.clone()], |g, v| g.add(v[0], v[1]));
    case!("sub", [a.clone(), b.clone()], |g, v| g.sub(v[0], v[1]));
    case!("mul", [a.clone(), b.clone()], |g, v| g.mul(v[0], v[1]));
    case!("self_mul", [a.clone()], |g, v| g.mul(v[0], v[0]));
    case!("scale", [a.clone()], |g, v| Ok(g.scale(v[0], -1.7)));
    case!("add_bias", [a.clone(), bias.clone()], |g, v| g.add_bias(v[0], v[1]));
    case!("scale_by", [a.clone(), s.clone()], |g, v| g.scale_by(v[0], v[1], 1));
    case!("linear", [a.clone(), w.clone(), bias5.clone()], |g, v| g.linear(v[0], v[1], Some(v[2])));
    case!("linear_no_bias", [a.clone(), w.clone()], |g, v| g.linear(v[0], v[1], None));
    case!("softmax_rows", [a.clone()], |g, v| g.softmax(v[0], 1));
    case!("softmax_cols", [a.clone()], |g, v| g.softmax(v[0], 0));
    case!("log_softmax_rows", [a.clone()], |g, v| g.log_softmax(v[0], 1));
    case!("log_softmax_cols", [a.clone()], |g, v| g.log_softmax(v[0], 0));
    case!("mean_axis0", [cube.clone()], |g, v| g.mean_along(v[0], 0));
    case!("mean_axis1", [cube.clone()], |g, v| g.mean_along(v[0], 1));
    case!("mean_axis2", [cube.clone()], |g, v| g.mean_along(v[0], 2));
    case!("sum_all", [a.clone()], |g, v| Ok(g.sum_all(v[0])));
    case!("concat_rows", [a.clone(), b.clone()], |g, v| g.concat(v[0], v[1], 0));
    case!("concat_cols", [a.clone(), w.clone().transpose()?.narrow(0, 0, 3)?], |g, v| g.concat(v[0], v[1], 1));
    case!("narrow", [cube.clone()], |g, v| g.narrow(v[0], 2, 1, 2));
    case!("reshape", [cube.clone()], |g, v| g.reshape(v[0], &[6, 4]));
    case!("transpose", [a.clone()], |g, v| g.transpose(v[0]));
    case!("layer_norm", [a.clone(), gamma.clone(), bias.clone()], |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5));
    case!("gelu", [a.clone()], |g, v| Ok(g.gelu(v[0])));
    case!("repeat", [a.clone()], |g, v| g.repeat(v[0], 1, 3));
    case!("l2_normalize_rows", [a.clone()], |g, v| g.l2_normalize_rows(v[0], 1e-12));
    case!("softmax_of_positive", [pos], |g, v| g.softmax(v[0], 1));
    Ok(out)
}

/// The smallest configuration the end-to-end checks run on:
/// `T = 2`, `h = w = 2`, `D = 4`, `C = 3`.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        heads: 2,
        ..ModelConfig::new(2, 2, 2, 4, 3)
    }
}

/// A tiny model in f64 with every parameter drawn at unit scale, so no
/// gradient path is numerically dormant.
pub fn tiny_model(seed: u64) -> Result<FtpModel<f64>> {
    let mut model = FtpModel::init(tiny_config(), seed)?.cast::<f64>();
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let dims = model.params.get(id).dims().to_vec();
        let t = randn(&dims, seed, 100 + id.index() as u64).scale(0.5);
        model.params.set(id, t)?;
    }
    Ok(model)
}

fn flatten_params(model: &FtpModel<f64>) -> Tensor<f64> {
    let data: Vec<f64> = model.params.iter().flat_map(|(_, _, t)| t.data().to_vec()).collect();
    Tensor::new(vec![data.len()], data).expect("flat")
}

fn unflatten_params(model: &mut FtpModel<f64>, flat: &Tensor<f64>) {
    let mut off = 0;
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let t = model.params.get_mut(id);
        let n = t.len();
        t.data_mut().copy_from_slice(&flat.data()[off..off + n]);
        off += n;
    }
}

fn model_check<F>(model: &FtpModel<f64>, loss: F) -> Result<f64>
where
    F: Fn(&FtpModel<f64>, &mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let pv = model.bind(&mut g);
    let l = loss(model, &mut g, &pv)?;
    let grads = g.backward(l)?.for_params(&model.params.shapes());
    let data: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
    let analytic = Tensor::new(vec![data.len()], data)?;
    let mut probe_model = model.clone();
    let numeric = finite_diff_grad(
        |flat| {
            unflatten_params(&mut probe_model, flat);
            let mut g = Graph::new();
            let pv = probe_model.bind(&mut g);
            let l = loss(&probe_model, &mut g, &pv).expect("forward succeeded on the unperturbed model");
            g.value(l).data()[0]
        },
        &flatten_params(model),
        STEP,
    );
    Ok(relative_error(&analytic, &numeric))
}

const BATCH: usize = 3;

fn tiny_maps(seed: u64) -> Tensor<f64> {
    let mut dims = vec![BATCH];
    dims.extend(tiny_config().feature_dims());
    randn(&dims, seed, 50)
}

/// Processors of all four prompts against random text banks, summed InfoNCE,
/// differentiated with respect to every model parameter.
pub fn end_to_end_info_nce(seed: u64) -> Result<f64> {
    let model = tiny_model(seed)?;
    let c = tiny_config();
    let maps = tiny_maps(seed);
    let width = (c.t + c.tokens()) * c.dim;
    let texts: Vec<Tensor<f64>> = (0..4).map(|p| randn(&[BATCH, width], seed, 60 + p)).collect();
    let objective = InfoNce::default();
    model_check(&model, |m, g, pv| {
        let mv = g.constant(maps.clone());
        let mut total: Option<Var> = None;
        for p in Prompt::ALL {
            let v = m.feature_process_batch(g, pv, mv, p)?;
            let e = g.constant(texts[p.slot()].clone());
            let l = objective.loss_graph(g, v, e)?;
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l)?,
            });
        }
        Ok(total.expect("four prompts"))
    })
}

/// Full forward with all prompts enabled, smoothed cross-entropy against
/// fixed labels, differentiated with respect to every model parameter.
pub fn end_to_end_cross_entropy(seed: u64) -> Result<f64> {
    let model = tiny_model(seed)?;
    let c = tiny_config();
    let maps = tiny_maps(seed);
    let labels: Vec<usize> = (0..BATCH).map(|i| i % c.classes).collect();
    let target = smoothed_targets::<f64>(&labels, c.classes, 0.1)?;
    model_check(&model, |m, g, pv| {
        let mut rows: Option<Var> = None;
        for i in 0..BATCH {
            let x = maps.narrow(0, i, 1)?.reshape(&c.feature_dims())?;
            let mv = g.constant(x);
            let logits = m.forward_logits(g, pv, mv, PromptSet::ALL)?;
            let row = g.reshape(logits, &[1, c.classes])?;
            rows = Some(match rows {
                None => row,
                Some(acc) => g.concat(acc, row, 0)?,
            });
        }
        soft_cross_entropy_graph(g, rows.expect("batch"), &target)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sum_has_unit_gradient() {
        let x = Tensor::new(vec![4], vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        let g = finite_diff_grad(|t| t.sum_all(), &x, 1e-3);
        assert!(g.data().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn square_at_three() {
        let x = Tensor::new(vec![1], vec![3.0]).unwrap();
        let g = finite_diff_grad(|t| t.data()[0] * t.data()[0], &x, 1e-3);
        assert!((g.data()[0] - 6.0).abs() < 1e-5);
    }
}

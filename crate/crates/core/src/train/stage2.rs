use crate::autograd::Graph;
use crate::error::Result;
use crate::model::FtpModel;
use crate::objectives::{smoothed_targets, soft_cross_entropy_graph, MixupDraw};
use crate::rng::{self, tag};

use super::{
    batch_maps, clip_global_norm, epoch_order, evaluate, inject_frozen_write, partition, AdamW, FaultInjection,
    FreezeMask, FrozenSnapshot, Metrics, Prepared, RunConfig, Schedule, TraceRow,
};

#[derive(Clone, Debug)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout: Metrics,
}

#[derive(Clone, Debug)]
pub struct Stage2Outcome {
    /// Parameters of the epoch with the best held-out top-1 (earliest on
    /// ties; the initialization when no epoch runs).
    pub best: FtpModel,
    pub best_epoch: usize,
    pub best_metrics: Metrics,
    pub history: Vec<EpochReport>,
    pub trace: Vec<TraceRow>,
    pub steps: usize,
}

/// Fine-tunes integration and classifier with label-smoothed
/// cross-entropy (and mixup), processors frozen.
pub fn run_stage2(cfg: &RunConfig, data: &Prepared, mut model: FtpModel) -> Result<Stage2Outcome> {
    let sc = &cfg.stage2;
    let mask = FreezeMask::stage2(&model.params);
    let trainable = mask.trainable_ids();
    let stubs = data.world.stubs();
    let snapshot = FrozenSnapshot::capture(&model.params, &mask, stubs);
    let labels = data.train_labels();
    let heldout_labels = data.heldout_labels();
    let classes = model.config.classes;
    let batches = partition(data.train.len(), sc.batch_size, cfg.seed, 2)?;
    let nb = batches.len();
    let schedule = Schedule::new(sc.lr, sc.warmup_epochs, sc.epochs, nb);
    let mut opt = AdamW::new(&model.params, sc.beta1, sc.beta2, sc.weight_decay);
    let shapes = model.params.shapes();
    let mut step = 0usize;
    let mut trace = Vec::new();
    let mut history = Vec::with_capacity(sc.epochs);

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_metrics = evaluate(&model, &data.heldout_maps, &heldout_labels, cfg.prompts)?;
    if sc.epochs > 0 {
        // any trained epoch replaces the initialization
        best_metrics.top1 = f64::NEG_INFINITY;
    }

    for epoch in 1..=sc.epochs {
        let mut batch_loss = vec![0.0f64; nb];
        for bi in epoch_order(nb, cfg.seed, 2, epoch) {
            let idx = &batches[bi];
            let maps = batch_maps(data, sc, idx, cfg.seed, 2, epoch)?;
            let ys: Vec<usize> = idx
                .iter()
                .flat_map(|&i| std::iter::repeat_n(labels[i], sc.repeated_aug))
                .collect();
            let mut r = rng::stream(cfg.seed, &[tag::MIXUP, epoch as u64, bi as u64]);
            let draw = MixupDraw::sample(maps.len(), sc.mixup_alpha, &mut r)?;
            let mixed = draw.mix_inputs(&maps)?;
            let target = draw.mix_targets(&smoothed_targets::<f32>(&ys, classes, sc.label_smoothing)?)?;

            let mut g = Graph::new();
            let pv = model.params.bind_masked(&mut g, |id| mask.is_trainable(id));
            let mut logits = None;
            for m in mixed {
                let mv = g.constant(m);
                let z = model.forward_logits(&mut g, &pv, mv, cfg.prompts)?;
                let z = g.reshape(z, &[1, classes])?;
                logits = Some(match logits {
                    None => z,
                    Some(acc) => g.concat(acc, z, 0)?,
                });
            }
            let loss = soft_cross_entropy_graph(&mut g, logits.expect("non-empty batch"), &target)?;
            batch_loss[bi] = g.value(loss).data()[0] as f64;
            let mut grads = g.backward(loss)?.for_params(&shapes);
            if sc.grad_clip > 0.0 {
                clip_global_norm(&mut grads, &trainable, sc.grad_clip);
            }
            opt.step(&mut model.params, &grads, &trainable, schedule.lr_at(step))?;
            step += 1;
            if step == 1 && cfg.fault_injection == FaultInjection::WriteFrozen {
                inject_frozen_write(&mut model.params, &mask);
            }
        }
        snapshot.verify(&model.params, stubs)?;
        let train_loss = batch_loss.iter().sum::<f64>() / nb as f64;
        let heldout = evaluate(&model, &data.heldout_maps, &heldout_labels, cfg.prompts)?;
        for (split, metric, value) in [
            ("train", "cross_entropy", train_loss),
            ("heldout", "top1", heldout.top1),
            ("heldout", "top5", heldout.top5),
        ] {
            trace.push(TraceRow {
                step,
                epoch,
                split,
                metric: metric.into(),
                value,
            });
        }
        if heldout.top1 > best_metrics.top1 {
            best = model.clone();
            best_epoch = epoch;
            best_metrics = heldout.clone();
        }
        history.push(EpochReport {
            epoch,
            train_loss,
            heldout,
        });
    }
    Ok(Stage2Outcome {
        best,
        best_epoch,
        best_metrics,
        history,
        trace,
        steps: step,
    })
}

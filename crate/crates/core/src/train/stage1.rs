use crate::autograd::Graph;
use crate::error::{Error, Result};
use crate::model::FtpModel;
use crate::prompt::Prompt;
use crate::tensor::Tensor;

use super::{
    batch_maps, clip_global_norm, epoch_order, inject_frozen_write, partition, stack, AdamW, FaultInjection,
    FreezeMask, FrozenSnapshot, Prepared, RunConfig, Schedule, TraceRow,
};

#[derive(Clone, Debug)]
pub struct Stage1Outcome {
    pub model: FtpModel,
    /// Mean InfoNCE per epoch, averaged over the enabled prompts.
    pub epoch_losses: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub steps: usize,
}

/// Aligns the processors of the enabled prompts with their text
/// embeddings. Frozen tensors are verified after every epoch.
pub fn run_stage1(cfg: &RunConfig, data: &Prepared, mut model: FtpModel) -> Result<Stage1Outcome> {
    if cfg.prompts.is_empty() {
        return Err(Error::config("stage 1 needs at least one enabled prompt"));
    }
    let sc = &cfg.stage1;
    let prompts: Vec<Prompt> = cfg.prompts.iter().collect();
    let mask = FreezeMask::stage1(&model.params, cfg.prompts);
    let trainable = mask.trainable_ids();
    let stubs = data.world.stubs();
    let snapshot = FrozenSnapshot::capture(&model.params, &mask, stubs);
    let batches = partition(data.train.len(), sc.batch_size, cfg.seed, 1)?;
    let nb = batches.len();
    let schedule = Schedule::new(sc.lr, sc.warmup_epochs, sc.epochs, nb);
    let mut opt = AdamW::new(&model.params, sc.beta1, sc.beta2, sc.weight_decay);
    let shapes = model.params.shapes();
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(sc.epochs);
    let mut trace = Vec::new();

    for epoch in 1..=sc.epochs {
        let mut batch_loss = vec![0.0f64; nb];
        let mut prompt_loss = vec![[0.0f64; 4]; nb];
        for bi in epoch_order(nb, cfg.seed, 1, epoch) {
            let idx = &batches[bi];
            let maps = batch_maps(data, sc, idx, cfg.seed, 1, epoch)?;
            let mut g = Graph::new();
            let pv = model.params.bind_masked(&mut g, |id| mask.is_trainable(id));
            let mv = g.constant(stack(&maps.iter().collect::<Vec<_>>())?);
            let mut total = None;
            for &p in &prompts {
                let v = model.feature_process_batch(&mut g, &pv, mv, p)?;
                let texts: Vec<&Tensor> = idx
                    .iter()
                    .flat_map(|&i| std::iter::repeat_n(&data.train_text[i][p.slot()], sc.repeated_aug))
                    .collect();
                let e = g.constant(stack(&texts)?);
                let l = cfg.info_nce.loss_graph(&mut g, v, e)?;
                prompt_loss[bi][p.slot()] = g.value(l).data()[0] as f64;
                total = Some(match total {
                    None => l,
                    Some(t) => g.add(t, l)?,
                });
            }
            let loss = g.scale(total.expect("prompts non-empty"), 1.0 / prompts.len() as f32);
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
        // summed in batch-index order so the mean does not depend on the
        // visiting order
        let mean = batch_loss.iter().sum::<f64>() / nb as f64;
        epoch_losses.push(mean);
        trace.push(TraceRow {
            step,
            epoch,
            split: "train",
            metric: "info_nce".into(),
            value: mean,
        });
        for &p in &prompts {
            let m = prompt_loss.iter().map(|l| l[p.slot()]).sum::<f64>() / nb as f64;
            trace.push(TraceRow {
                step,
                epoch,
                split: "train",
                metric: format!("info_nce_{}", p.letter()),
                value: m,
            });
        }
    }
    Ok(Stage1Outcome {
        model,
        epoch_losses,
        trace,
        steps: step,
    })
}

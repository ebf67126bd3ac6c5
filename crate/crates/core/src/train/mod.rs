//! The two-stage protocol: contrastive alignment of the feature processors
//! with everything else frozen, then fine-tuning of integration and
//! classifier with the processors frozen.

mod adamw;
mod augment;
mod checkpoint;
mod config;
mod data;
mod eval;
mod freeze;
mod schedule;
mod stage1;
mod stage2;
mod trace;

pub use adamw::{clip_global_norm, AdamW};
pub use augment::augment;
pub use checkpoint::Checkpoint;
pub use config::{FaultInjection, Preset, RunConfig, StageConfig};
pub use data::{stack, Prepared};
pub use eval::{evaluate, Metrics};
pub use freeze::{FreezeMask, FrozenSnapshot};
pub use schedule::Schedule;
pub use stage1::{run_stage1, Stage1Outcome};
pub use stage2::{run_stage2, EpochReport, Stage2Outcome};
pub use trace::{append_csv, TraceRow, CSV_HEADER};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::{self, tag};
use crate::tensor::Tensor;

/// Fixed batch composition for a run: a seeded permutation cut into
/// `batch_size` chunks. A trailing singleton joins the previous batch so
/// every batch has a negative for the contrastive loss.
pub(crate) fn partition(n: usize, batch_size: usize, seed: u64, stage: u8) -> Result<Vec<Vec<usize>>> {
    if n < 2 {
        return Err(Error::config(format!("need at least 2 training samples, got {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, &[tag::BATCHES, stage as u64, 0]));
    let mut batches: Vec<Vec<usize>> = perm.chunks(batch_size).map(|c| c.to_vec()).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(last);
    }
    Ok(batches)
}

/// Visiting order of the batches in one epoch.
pub(crate) fn epoch_order(batches: usize, seed: u64, stage: u8, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..batches).collect();
    order.shuffle(&mut rng::stream(seed, &[tag::BATCHES, stage as u64, epoch as u64]));
    order
}

/// Feature maps for the samples of one batch, each repeated `copies`
/// times; augmented videos are re-encoded, otherwise cached maps are used.
pub(crate) fn batch_maps(
    data: &Prepared,
    stage: &StageConfig,
    idx: &[usize],
    seed: u64,
    stage_no: u8,
    epoch: usize,
) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(idx.len() * stage.repeated_aug);
    for &i in idx {
        for rep in 0..stage.repeated_aug {
            if stage.flip_aug || stage.crop_aug {
                let mut r = rng::stream(
                    seed,
                    &[tag::AUGMENT, stage_no as u64, epoch as u64, i as u64, rep as u64],
                );
                let frames = augment(&data.train[i].frames, stage.flip_aug, stage.crop_aug, &mut r);
                out.push(data.world.stubs().visual_encode(&frames)?);
            } else {
                out.push(data.train_maps[i].clone());
            }
        }
    }
    Ok(out)
}

/// The `write_frozen` fault: nudge the first frozen parameter.
pub(crate) fn inject_frozen_write(params: &mut ParamStore, mask: &FreezeMask) {
    if let Some(id) = params.ids().find(|&id| !mask.is_trainable(id)) {
        params.get_mut(id).data_mut()[0] += 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_covers_every_sample_once() {
        let b = partition(65, 32, 7, 1).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].len(), 33);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..65).collect::<Vec<_>>());
        assert_eq!(b, partition(65, 32, 7, 1).unwrap());
        assert_ne!(b, partition(65, 32, 8, 1).unwrap());
    }

    #[test]
    fn epoch_orders_are_permutations() {
        let o = epoch_order(7, 1, 2, 3);
        let mut s = o.clone();
        s.sort();
        assert_eq!(s, (0..7).collect::<Vec<_>>());
    }
}

use crate::error::{Error, Result};
use crate::params::{ParamGroup, ParamId, ParamStore};
use crate::prompt::PromptSet;
use crate::world::EncoderStubs;

/// Which parameters a stage may update.
#[derive(Clone, Debug, PartialEq)]
pub struct FreezeMask {
    pub stage: u8,
    trainable: Vec<bool>,
}

impl FreezeMask {
    /// Stage 1: the processors of the enabled prompts.
    pub fn stage1(params: &ParamStore, prompts: PromptSet) -> Self {
        Self::from_groups(1, params, |g| match g {
            ParamGroup::Processor(slot) => prompts.iter().any(|p| p.slot() == slot),
            _ => false,
        })
    }

    /// Stage 2: integration and classifier.
    pub fn stage2(params: &ParamStore) -> Self {
        Self::from_groups(2, params, |g| {
            matches!(g, ParamGroup::Integration | ParamGroup::Classifier)
        })
    }

    fn from_groups(stage: u8, params: &ParamStore, f: impl Fn(ParamGroup) -> bool) -> Self {
        Self {
            stage,
            trainable: params.ids().map(|id| f(params.group(id))).collect(),
        }
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.index()]
    }

    pub fn trainable_ids(&self) -> Vec<ParamId> {
        (0..self.trainable.len())
            .filter(|&i| self.trainable[i])
            .map(ParamId::new)
            .collect()
    }
}

/// Checksums of everything a stage must not touch: frozen parameters and
/// the encoder stubs.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenSnapshot {
    stage: u8,
    sums: Vec<(String, String)>,
}

impl FrozenSnapshot {
    pub fn capture(params: &ParamStore, mask: &FreezeMask, stubs: &EncoderStubs) -> Self {
        let mut sums: Vec<(String, String)> = params
            .iter()
            .filter(|(id, _, _)| !mask.is_trainable(*id))
            .map(|(_, name, t)| (name.to_string(), t.checksum()))
            .collect();
        sums.extend(stubs.checksums());
        Self {
            stage: mask.stage,
            sums,
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Fails with the first tensor whose checksum moved.
    pub fn verify(&self, params: &ParamStore, stubs: &EncoderStubs) -> Result<()> {
        let stub_sums = stubs.checksums();
        for (name, sum) in &self.sums {
            let now = match params.by_name(name) {
                Some(t) => t.checksum(),
                None => match stub_sums.iter().find(|(n, _)| n == name) {
                    Some((_, s)) => s.clone(),
                    None => String::new(),
                },
            };
            if &now != sum {
                return Err(Error::FreezeViolation {
                    param: name.clone(),
                    stage: self.stage,
                });
            }
        }
        Ok(())
    }
}

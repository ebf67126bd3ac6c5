use crate::error::Result;
use crate::prompt::Prompt;
use crate::tensor::Tensor;
use crate::world::{SyntheticVideo, Split, World};

use super::RunConfig;

/// A generated world with both splits encoded once. The visual stub is
/// frozen, so feature maps of un-augmented videos can be cached.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub world: World,
    pub train: Vec<SyntheticVideo>,
    pub heldout: Vec<SyntheticVideo>,
    pub train_maps: Vec<Tensor>,
    pub heldout_maps: Vec<Tensor>,
    /// Per training video, the flattened text embedding of each prompt
    /// described from `keyframes` keyframes.
    pub train_text: Vec<[Tensor; 4]>,
    pub keyframes: usize,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let world = World::new(cfg.world.clone())?;
        let train = world.generate(Split::Train, cfg.train_per_class)?;
        let heldout = world.generate(Split::Heldout, cfg.heldout_per_class)?;
        Self::from_videos(world, train, heldout, cfg.keyframes)
    }

    pub fn from_videos(
        world: World,
        train: Vec<SyntheticVideo>,
        heldout: Vec<SyntheticVideo>,
        keyframes: usize,
    ) -> Result<Self> {
        let encode = |vs: &[SyntheticVideo]| -> Result<Vec<Tensor>> {
            vs.iter().map(|v| world.stubs().visual_encode(&v.frames)).collect()
        };
        let train_maps = encode(&train)?;
        let heldout_maps = encode(&heldout)?;
        let train_text = train
            .iter()
            .map(|v| {
                let mut out = Vec::with_capacity(4);
                for p in Prompt::ALL {
                    let e = world.describe(v, keyframes, p)?;
                    let n = e.len();
                    out.push(e.reshape(&[n])?);
                }
                Ok(out.try_into().expect("four prompts"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            world,
            train,
            heldout,
            train_maps,
            heldout_maps,
            train_text,
            keyframes,
        })
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|v| v.label).collect()
    }

    pub fn heldout_labels(&self) -> Vec<usize> {
        self.heldout.iter().map(|v| v.label).collect()
    }
}

/// Stacks equally shaped tensors along a new leading axis.
pub fn stack(ts: &[&Tensor]) -> Result<Tensor> {
    let inner = ts.first().map(|t| t.dims().to_vec()).unwrap_or_default();
    let mut data = Vec::with_capacity(ts.len() * ts.first().map_or(0, |t| t.len()));
    for t in ts {
        if t.dims() != inner.as_slice() {
            return Err(crate::error::Error::shape("stack", &inner, t.dims()));
        }
        data.extend_from_slice(t.data());
    }
    let mut dims = vec![ts.len()];
    dims.extend(inner);
    Tensor::new(dims, data)
}

//! The FTP network: four feature processors over a frozen feature map,
//! the integration layer that folds their outputs back into the map, and a
//! two-block transformer classifier.

mod classifier;
mod integration;
mod processor;

pub use classifier::ClassifierTrace;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{ParamGroup, ParamId, ParamStore};
use crate::prompt::{Prompt, PromptSet};
use crate::rng::{self, tag};
use crate::tensor::{Scalar, Tensor};
use crate::world::WorldConfig;

/// FLOP-accounting scopes used by the forward pass.
pub mod scope {
    pub const POOLING: &str = "processor.pooling";
    pub const PROCESSOR: &str = "processor.projection";
    pub const INTEGRATION: &str = "integration";
    pub const BLOCKS: &str = "classifier.blocks";
    pub const HEAD: &str = "classifier.head";
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub t: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
    pub classes: usize,
    pub heads: usize,
    /// Feed-forward hidden width; `4 * dim` by default.
    pub ffn_hidden: usize,
    /// Std of processor and integration projection weights at init.
    pub projection_init_std: f64,
    /// Std of attention, feed-forward and head weights at init.
    pub classifier_init_std: f64,
    pub layer_norm_eps: f64,
}

impl ModelConfig {
    pub fn new(t: usize, grid_h: usize, grid_w: usize, dim: usize, classes: usize) -> Self {
        Self {
            t,
            grid_h,
            grid_w,
            dim,
            classes,
            heads: 4,
            ffn_hidden: 4 * dim,
            projection_init_std: 1e-4,
            classifier_init_std: 0.02,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn from_world(w: &WorldConfig) -> Self {
        Self::new(w.t, w.grid_h, w.grid_w, w.dim, w.classes)
    }

    pub fn tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn feature_dims(&self) -> [usize; 4] {
        [self.t, self.grid_h, self.grid_w, self.dim]
    }

    pub fn validate(&self) -> Result<()> {
        if [self.t, self.grid_h, self.grid_w, self.dim, self.heads, self.ffn_hidden]
            .contains(&0)
        {
            return Err(Error::config("model sizes must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::config("model needs at least 2 classes"));
        }
        if self.dim % self.heads != 0 {
            return Err(Error::config(format!(
                "heads ({}) must divide dim ({})",
                self.heads, self.dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ProcessorIds {
    spatial_w: ParamId,
    spatial_b: ParamId,
    temporal_w: ParamId,
    temporal_b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IntegrationIds {
    time_w: ParamId,
    space_w: ParamId,
    gain: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BlockIds {
    ln1_g: ParamId,
    ln1_b: ParamId,
    q_w: ParamId,
    q_b: ParamId,
    k_w: ParamId,
    k_b: ParamId,
    v_w: ParamId,
    v_b: ParamId,
    o_w: ParamId,
    o_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    fc1_w: ParamId,
    fc1_b: ParamId,
    fc2_w: ParamId,
    fc2_b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ModelIds {
    processors: [ProcessorIds; 4],
    integration: IntegrationIds,
    blocks: [BlockIds; 2],
    head_w: ParamId,
    head_b: ParamId,
}

impl ModelIds {
    fn resolve<S: Scalar>(p: &ParamStore<S>) -> Result<Self> {
        let id = |name: String| {
            p.id(&name)
                .ok_or_else(|| Error::Format(format!("parameter `{name}` missing")))
        };
        let processor = |i: usize| -> Result<ProcessorIds> {
            Ok(ProcessorIds {
                spatial_w: id(format!("processor{i}.spatial.weight"))?,
                spatial_b: id(format!("processor{i}.spatial.bias"))?,
                temporal_w: id(format!("processor{i}.temporal.weight"))?,
                temporal_b: id(format!("processor{i}.temporal.bias"))?,
            })
        };
        let block = |b: usize| -> Result<BlockIds> {
            let n = |s: &str| id(format!("classifier.block{b}.{s}"));
            Ok(BlockIds {
                ln1_g: n("ln1.gamma")?,
                ln1_b: n("ln1.beta")?,
                q_w: n("attn.q.weight")?,
                q_b: n("attn.q.bias")?,
                k_w: n("attn.k.weight")?,
                k_b: n("attn.k.bias")?,
                v_w: n("attn.v.weight")?,
                v_b: n("attn.v.bias")?,
                o_w: n("attn.o.weight")?,
                o_b: n("attn.o.bias")?,
                ln2_g: n("ln2.gamma")?,
                ln2_b: n("ln2.beta")?,
                fc1_w: n("ffn.fc1.weight")?,
                fc1_b: n("ffn.fc1.bias")?,
                fc2_w: n("ffn.fc2.weight")?,
                fc2_b: n("ffn.fc2.bias")?,
            })
        };
        Ok(Self {
            processors: [processor(1)?, processor(2)?, processor(3)?, processor(4)?],
            integration: IntegrationIds {
                time_w: id("integration.time.weight".into())?,
                space_w: id("integration.space.weight".into())?,
                gain: id("integration.gain".into())?,
            },
            blocks: [block(0)?, block(1)?],
            head_w: id("classifier.head.weight".into())?,
            head_b: id("classifier.head.bias".into())?,
        })
    }
}

/// Model parameters plus the resolved ids the forward pass uses.
#[derive(Clone, Debug, PartialEq)]
pub struct FtpModel<S = f32> {
    pub config: ModelConfig,
    pub params: ParamStore<S>,
    ids: ModelIds,
}

impl FtpModel<f32> {
    /// Fresh parameters: near-zero projections, unit gains, standard
    /// transformer init for the classifier.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, &[tag::MODEL_INIT]);
        let d = config.dim;
        let mut p = ParamStore::new();
        let ps = config.projection_init_std;
        for i in 1..=4 {
            let g = ParamGroup::Processor(i - 1);
            p.insert(&format!("processor{i}.spatial.weight"), g, Tensor::randn(&[d, d], ps, &mut r));
            p.insert(&format!("processor{i}.spatial.bias"), g, Tensor::zeros(&[d]));
            p.insert(&format!("processor{i}.temporal.weight"), g, Tensor::randn(&[d, d], ps, &mut r));
            p.insert(&format!("processor{i}.temporal.bias"), g, Tensor::zeros(&[d]));
        }
        let ig = ParamGroup::Integration;
        p.insert("integration.time.weight", ig, Tensor::randn(&[d, d], ps, &mut r));
        p.insert("integration.space.weight", ig, Tensor::randn(&[d, d], ps, &mut r));
        p.insert("integration.gain", ig, Tensor::ones(&[4]));
        let cs = config.classifier_init_std;
        let h = config.ffn_hidden;
        let cg = ParamGroup::Classifier;
        for b in 0..2 {
            let lin = |p: &mut ParamStore, name: &str, i: usize, o: usize, r: &mut dyn rand::RngCore| {
                p.insert(&format!("classifier.block{b}.{name}.weight"), cg, Tensor::randn(&[i, o], cs, r));
                p.insert(&format!("classifier.block{b}.{name}.bias"), cg, Tensor::zeros(&[o]));
            };
            p.insert(&format!("classifier.block{b}.ln1.gamma"), cg, Tensor::ones(&[d]));
            p.insert(&format!("classifier.block{b}.ln1.beta"), cg, Tensor::zeros(&[d]));
            for n in ["attn.q", "attn.k", "attn.v", "attn.o"] {
                lin(&mut p, n, d, d, &mut r);
            }
            p.insert(&format!("classifier.block{b}.ln2.gamma"), cg, Tensor::ones(&[d]));
            p.insert(&format!("classifier.block{b}.ln2.beta"), cg, Tensor::zeros(&[d]));
            lin(&mut p, "ffn.fc1", d, h, &mut r);
            lin(&mut p, "ffn.fc2", h, d, &mut r);
        }
        p.insert("classifier.head.weight", cg, Tensor::randn(&[d, config.classes], cs, &mut r));
        p.insert("classifier.head.bias", cg, Tensor::zeros(&[config.classes]));
        Self::from_params(config, p)
    }
}

impl<S: Scalar> FtpModel<S> {
    pub fn from_params(config: ModelConfig, params: ParamStore<S>) -> Result<Self> {
        config.validate()?;
        let ids = ModelIds::resolve(&params)?;
        let m = Self { config, params, ids };
        m.check_shapes()?;
        Ok(m)
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.config.dim;
        let want = |id: ParamId, dims: &[usize]| -> Result<()> {
            let got = self.params.get(id).dims();
            if got != dims {
                return Err(Error::shape(self.params.name(id), got, dims));
            }
            Ok(())
        };
        want(self.ids.head_w, &[d, self.config.classes])?;
        want(self.ids.integration.time_w, &[d, d])?;
        want(self.ids.integration.gain, &[4])?;
        want(self.ids.blocks[0].fc1_w, &[d, self.config.ffn_hidden])?;
        for p in &self.ids.processors {
            want(p.spatial_w, &[d, d])?;
        }
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> FtpModel<T> {
        FtpModel {
            config: self.config.clone(),
            params: self.params.cast(),
            ids: self.ids.clone(),
        }
    }

    /// Binds all parameters into `g`; indexed by `ParamId`.
    pub fn bind(&self, g: &mut Graph<S>) -> Vec<Var> {
        self.params.bind(g)
    }

    pub fn processor_param_count(&self) -> usize {
        self.params
            .count_where(|g| matches!(g, ParamGroup::Processor(_)))
    }

    pub fn integration_param_count(&self) -> usize {
        self.params.count_where(|g| g == ParamGroup::Integration)
    }

    pub fn classifier_param_count(&self) -> usize {
        self.params.count_where(|g| g == ParamGroup::Classifier)
    }

    fn check_feature_map(&self, g: &Graph<S>, m: Var) -> Result<()> {
        let want = self.config.feature_dims();
        if g.dims(m) != want {
            return Err(Error::shape("feature map", g.dims(m), &want));
        }
        Ok(())
    }

    /// End-to-end logits: processors for `enabled` prompts, integration with
    /// disabled slots contributing nothing, classifier.
    pub fn forward_logits(
        &self,
        g: &mut Graph<S>,
        pv: &[Var],
        m: Var,
        enabled: PromptSet,
    ) -> Result<Var> {
        let f = self.features(g, pv, m, enabled)?;
        self.classify_logits(g, pv, f)
    }

    /// Integrated feature map `f` for the enabled prompts.
    pub fn features(&self, g: &mut Graph<S>, pv: &[Var], m: Var, enabled: PromptSet) -> Result<Var> {
        if enabled.is_empty() {
            self.check_feature_map(g, m)?;
            return Ok(m);
        }
        let pooled = self.pool(g, m)?;
        let mut vs: [Option<Var>; 4] = [None; 4];
        for p in enabled.iter() {
            let v = self.project(g, pv, &pooled, p)?;
            vs[p.slot()] = Some(self.rescale(g, v)?);
        }
        self.integrate(g, pv, m, &vs)
    }

    /// `sqrt(T + N) * v / |v|`: unit-norm rows on average. The contrastive
    /// stage fixes only the direction of `v`, so its scale is set here
    /// rather than left to wherever stage 1 happened to stop.
    pub fn rescale(&self, g: &mut Graph<S>, v: Var) -> Result<Var> {
        let dims = g.dims(v).to_vec();
        let n: usize = dims.iter().product();
        let prev = g.set_scope(scope::PROCESSOR);
        let flat = g.reshape(v, &[1, n])?;
        let unit = g.l2_normalize_rows(flat, S::of(1e-12))?;
        let scaled = g.scale(unit, S::of((dims[0] as f64).sqrt()));
        let out = g.reshape(scaled, &dims);
        g.set_scope(prev);
        out
    }

    /// Pooled penultimate features `[D]` (mean over tokens after both blocks).
    pub fn embedding(&self, g: &mut Graph<S>, pv: &[Var], m: Var, enabled: PromptSet) -> Result<Var> {
        let f = self.features(g, pv, m, enabled)?;
        let (pooled, _) = self.encode_tokens(g, pv, f, false)?;
        Ok(pooled)
    }

    /// Tape-free probabilities for a single feature map.
    pub fn probabilities(&self, m: &Tensor<S>, enabled: PromptSet) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let pv = self.bind(&mut g);
        let mv = g.constant(m.clone());
        let logits = self.forward_logits(&mut g, &pv, mv, enabled)?;
        let probs = g.softmax(logits, 0)?;
        Ok(g.value(probs).clone())
    }

    /// Tape-free `v_i` for one prompt.
    pub fn spatio_temporal(&self, m: &Tensor<S>, prompt: Prompt) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let pv = self.bind(&mut g);
        let mv = g.constant(m.clone());
        let v = self.feature_process(&mut g, &pv, mv, prompt)?;
        Ok(g.value(v).clone())
    }
}

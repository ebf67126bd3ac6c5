//! Run configuration: a `key = value` file layered over a preset.

use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::model::ModelConfig;
use crate::objectives::InfoNce;
use crate::prompt::PromptSet;
use crate::world::WorldConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Small world, short runs, large learning rates.
    Desk,
    /// Optimizer and schedule values of the original large-scale recipe.
    Full,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(format!("unknown preset `{s}` (desk|full)")),
        }
    }
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        }
    }
}

/// Deliberate invariant breakage, for exercising the failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultInjection {
    None,
    /// Overwrite one frozen parameter after the first optimizer step.
    WriteFrozen,
}

impl FromStr for FaultInjection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(FaultInjection::None),
            "write_frozen" => Ok(FaultInjection::WriteFrozen),
            _ => Err(format!("unknown fault injection `{s}` (none|write_frozen)")),
        }
    }
}

impl FaultInjection {
    fn name(self) -> &'static str {
        match self {
            FaultInjection::None => "none",
            FaultInjection::WriteFrozen => "write_frozen",
        }
    }
}

/// Optimizer, schedule and augmentation settings of one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    /// Copies of each sample within a batch.
    pub repeated_aug: usize,
    pub flip_aug: bool,
    pub crop_aug: bool,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    pub label_smoothing: f64,
    pub mixup_alpha: f64,
}

impl StageConfig {
    fn validate(&self, stage: u8) -> Result<()> {
        let bad = |msg: String| Err(Error::config(format!("stage{stage}: {msg}")));
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if self.batch_size == 0 || self.repeated_aug == 0 {
            return bad("batch_size and repeated_aug must be positive".into());
        }
        if self.epochs > 0 && self.warmup_epochs >= self.epochs {
            return bad(format!(
                "warmup_epochs ({}) must be below epochs ({})",
                self.warmup_epochs, self.epochs
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing must be in [0, 1), got {}", self.label_smoothing));
        }
        if self.mixup_alpha < 0.0 || self.weight_decay < 0.0 || self.grad_clip < 0.0 {
            return bad("mixup_alpha, weight_decay and grad_clip must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    /// Drives model init, batching and augmentation; also the world seed
    /// unless `world_seed` pins the dataset.
    pub seed: u64,
    pub world_seed: Option<u64>,
    pub world: WorldConfig,
    pub train_per_class: usize,
    pub heldout_per_class: usize,
    pub heads: usize,
    pub projection_init_std: f64,
    pub classifier_init_std: f64,
    /// Keyframes concatenated before description.
    pub keyframes: usize,
    /// Prompts whose processors take part in both stages.
    pub prompts: PromptSet,
    pub info_nce: InfoNce,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub fault_injection: FaultInjection,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let desk1 = StageConfig {
            lr: 3e-3,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.95,
            batch_size: 32,
            epochs: 60,
            warmup_epochs: 2,
            repeated_aug: 1,
            flip_aug: false,
            crop_aug: false,
            grad_clip: 0.0,
            label_smoothing: 0.0,
            mixup_alpha: 0.0,
        };
        let desk2 = StageConfig {
            lr: 5e-3,
            beta2: 0.999,
            epochs: 20,
            label_smoothing: 0.1,
            mixup_alpha: 0.8,
            ..desk1.clone()
        };
        let (stage1, stage2) = match preset {
            Preset::Desk => (desk1, desk2),
            Preset::Full => (
                StageConfig {
                    lr: 1e-5,
                    batch_size: 512,
                    epochs: 800,
                    warmup_epochs: 5,
                    crop_aug: true,
                    ..desk1
                },
                StageConfig {
                    lr: 1e-5,
                    batch_size: 128,
                    epochs: 40,
                    warmup_epochs: 5,
                    repeated_aug: 2,
                    flip_aug: true,
                    crop_aug: true,
                    ..desk2
                },
            ),
        };
        let world = WorldConfig::default();
        Self {
            preset,
            seed: 1,
            world_seed: None,
            world,
            train_per_class: 20,
            heldout_per_class: 10,
            heads: 4,
            projection_init_std: 1e-4,
            classifier_init_std: 0.02,
            keyframes: 5,
            prompts: PromptSet::ALL,
            info_nce: InfoNce::default(),
            stage1,
            stage2,
            fault_injection: FaultInjection::None,
        }
    }

    pub fn desk() -> Self {
        Self::preset(Preset::Desk)
    }

    /// Parses a config file. `preset` (if present) is applied first, then
    /// every other key in file order. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let m = Manifest::parse(text)?;
        let mut cfg = match m.entry("preset") {
            Some(e) => Self::preset(e.value.parse().map_err(|msg| Error::config_at(e.line, msg))?),
            None => Self::desk(),
        };
        for e in m.entries() {
            if e.key == "preset" {
                continue;
            }
            cfg.set(&e.key, &e.value).map_err(|msg| Error::config_at(e.line, msg))?;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Re-derives the world seed and checks every invariant.
    pub fn finish(&mut self) -> Result<()> {
        self.world.seed = self.world_seed.unwrap_or(self.seed);
        self.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.world.seed = c.world_seed.unwrap_or(seed);
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model_config().validate()?;
        self.stage1.validate(1)?;
        self.stage2.validate(2)?;
        if self.train_per_class == 0 || self.heldout_per_class == 0 {
            return Err(Error::config("samples per class must be positive"));
        }
        if self.keyframes == 0 || self.keyframes > self.world.frames {
            return Err(Error::config(format!(
                "keyframes must be in 1..={}, got {}",
                self.world.frames, self.keyframes
            )));
        }
        if !(self.info_nce.temperature > 0.0) {
            return Err(Error::config("temperature must be positive"));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            heads: self.heads,
            projection_init_std: self.projection_init_std,
            classifier_init_std: self.classifier_init_std,
            ..ModelConfig::from_world(&self.world)
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn p<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        fn stage(s: &mut StageConfig, key: &str, field: &str, v: &str, second: bool) -> std::result::Result<(), String> {
            match field {
                "lr" => s.lr = p(key, v)?,
                "weight_decay" => s.weight_decay = p(key, v)?,
                "beta1" => s.beta1 = p(key, v)?,
                "beta2" => s.beta2 = p(key, v)?,
                "batch_size" => s.batch_size = p(key, v)?,
                "epochs" => s.epochs = p(key, v)?,
                "warmup_epochs" => s.warmup_epochs = p(key, v)?,
                "repeated_aug" => s.repeated_aug = p(key, v)?,
                "flip_aug" => s.flip_aug = p(key, v)?,
                "crop_aug" => s.crop_aug = p(key, v)?,
                "grad_clip" => s.grad_clip = p(key, v)?,
                "label_smoothing" if second => s.label_smoothing = p(key, v)?,
                "mixup_alpha" if second => s.mixup_alpha = p(key, v)?,
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        }
        let w = &mut self.world;
        match key {
            "seed" => self.seed = p(key, value)?,
            "world.seed" => self.world_seed = Some(p(key, value)?),
            "fault_injection" => self.fault_injection = value.parse()?,
            "world.classes" => w.classes = p(key, value)?,
            "world.frames" => w.frames = p(key, value)?,
            "world.height" => w.height = p(key, value)?,
            "world.width" => w.width = p(key, value)?,
            "world.t" => w.t = p(key, value)?,
            "world.grid_h" => w.grid_h = p(key, value)?,
            "world.grid_w" => w.grid_w = p(key, value)?,
            "world.dim" => w.dim = p(key, value)?,
            "world.component_dim" => w.component_dim = p(key, value)?,
            "world.description_dim" => w.description_dim = p(key, value)?,
            "world.context_dim" => w.context_dim = p(key, value)?,
            "world.class_spread" => w.class_spread = p(key, value)?,
            "world.signal_amp" => w.signal_amp = p(key, value)?,
            "world.pixel_noise" => w.pixel_noise = p(key, value)?,
            "world.text_noise" => w.text_noise = p(key, value)?,
            "world.k_saturation" => w.k_saturation = p(key, value)?,
            "world.k_degradation" => w.k_degradation = p(key, value)?,
            "world.k_redundancy" => w.k_redundancy = p(key, value)?,
            "data.train_per_class" => self.train_per_class = p(key, value)?,
            "data.heldout_per_class" => self.heldout_per_class = p(key, value)?,
            "model.heads" => self.heads = p(key, value)?,
            "model.projection_init_std" => self.projection_init_std = p(key, value)?,
            "model.classifier_init_std" => self.classifier_init_std = p(key, value)?,
            "keyframes" => self.keyframes = p(key, value)?,
            "prompts" => self.prompts = value.parse().map_err(|e: Error| e.to_string())?,
            "loss.temperature" => self.info_nce.temperature = p(key, value)?,
            "loss.symmetric" => self.info_nce.symmetric = p(key, value)?,
            _ => {
                if let Some(field) = key.strip_prefix("stage1.") {
                    return stage(&mut self.stage1, key, field, value, false);
                }
                if let Some(field) = key.strip_prefix("stage2.") {
                    return stage(&mut self.stage2, key, field, value, true);
                }
                return Err(format!("unknown key `{key}`"));
            }
        }
        Ok(())
    }

    /// Every setting as a manifest, in a fixed order; parsing the rendered
    /// text gives back an equal config.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        let w = &self.world;
        m.push("preset", self.preset.name());
        m.push("seed", self.seed);
        if let Some(s) = self.world_seed {
            m.push("world.seed", s);
        }
        m.push("fault_injection", self.fault_injection.name());
        m.push("world.classes", w.classes);
        m.push("world.frames", w.frames);
        m.push("world.height", w.height);
        m.push("world.width", w.width);
        m.push("world.t", w.t);
        m.push("world.grid_h", w.grid_h);
        m.push("world.grid_w", w.grid_w);
        m.push("world.dim", w.dim);
        m.push("world.component_dim", w.component_dim);
        m.push("world.description_dim", w.description_dim);
        m.push("world.context_dim", w.context_dim);
        m.push("world.class_spread", w.class_spread);
        m.push("world.signal_amp", w.signal_amp);
        m.push("world.pixel_noise", w.pixel_noise);
        m.push("world.text_noise", w.text_noise);
        m.push("world.k_saturation", w.k_saturation);
        m.push("world.k_degradation", w.k_degradation);
        m.push("world.k_redundancy", w.k_redundancy);
        m.push("data.train_per_class", self.train_per_class);
        m.push("data.heldout_per_class", self.heldout_per_class);
        m.push("model.heads", self.heads);
        m.push("model.projection_init_std", self.projection_init_std);
        m.push("model.classifier_init_std", self.classifier_init_std);
        m.push("keyframes", self.keyframes);
        m.push("prompts", self.prompts);
        m.push("loss.temperature", self.info_nce.temperature);
        m.push("loss.symmetric", self.info_nce.symmetric);
        for (name, s, second) in [("stage1", &self.stage1, false), ("stage2", &self.stage2, true)] {
            m.push(&format!("{name}.lr"), s.lr);
            m.push(&format!("{name}.weight_decay"), s.weight_decay);
            m.push(&format!("{name}.beta1"), s.beta1);
            m.push(&format!("{name}.beta2"), s.beta2);
            m.push(&format!("{name}.batch_size"), s.batch_size);
            m.push(&format!("{name}.epochs"), s.epochs);
            m.push(&format!("{name}.warmup_epochs"), s.warmup_epochs);
            m.push(&format!("{name}.repeated_aug"), s.repeated_aug);
            m.push(&format!("{name}.flip_aug"), s.flip_aug);
            m.push(&format!("{name}.crop_aug"), s.crop_aug);
            m.push(&format!("{name}.grad_clip"), s.grad_clip);
            if second {
                m.push(&format!("{name}.label_smoothing"), s.label_smoothing);
                m.push(&format!("{name}.mixup_alpha"), s.mixup_alpha);
            }
        }
        m
    }

    /// SHA-256 of the rendered config.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_manifest().render().as_bytes()))
    }
}

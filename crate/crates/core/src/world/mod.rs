//! Deterministic stand-ins for the frozen parts of the pipeline: the video
//! source, the visual encoder, and the VLM + text encoder.
//!
//! Every video is rendered from a small set of latent factors (category,
//! action components, detailed description, context), each a unit vector
//! drawn around a per-class centroid. Frames mix factor-specific spatial
//! patterns smoothly over time; the text stubs read the factors directly,
//! so a prompt-specific text embedding carries the aspect that prompt asks
//! about.

mod io;
mod keyframes;
mod stubs;

pub use io::{load_dataset, save_dataset, DatasetFiles};
pub use keyframes::{extract_keyframes, keyframe_indices, keyframes_of, KeyframeImage};
pub use stubs::{EncoderStubs, TextNoise};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::prompt::Prompt;
use crate::rng::{self, tag};
use crate::tensor::Tensor;

/// Sizes and noise levels of the synthetic world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub seed: u64,
    pub classes: usize,
    /// Source frames per video.
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Temporal length `T` of the feature map.
    pub t: usize,
    /// Feature-map grid `h x w`.
    pub grid_h: usize,
    pub grid_w: usize,
    /// Feature depth `D`.
    pub dim: usize,
    pub component_dim: usize,
    pub description_dim: usize,
    pub context_dim: usize,
    /// Within-class spread of every factor vector around its centroid.
    pub class_spread: f64,
    /// Amplitude of the factor signal in pixel space.
    pub signal_amp: f64,
    pub pixel_noise: f64,
    /// Text-embedding noise sigma.
    pub text_noise: f64,
    /// Keyframe count at which VLM descriptions are most faithful.
    pub k_saturation: usize,
    /// Fidelity lost per keyframe below saturation.
    pub k_degradation: f64,
    /// Extra text noise per keyframe above saturation.
    pub k_redundancy: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            classes: 10,
            frames: 8,
            height: 8,
            width: 8,
            t: 4,
            grid_h: 2,
            grid_w: 2,
            dim: 16,
            component_dim: 8,
            description_dim: 8,
            context_dim: 8,
            class_spread: 1.0,
            signal_amp: 0.25,
            pixel_noise: 0.05,
            text_noise: 0.1,
            k_saturation: 5,
            k_degradation: 0.25,
            k_redundancy: 3.0,
        }
    }
}

impl WorldConfig {
    pub fn tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    /// Rows of a spatio-temporal feature / text embedding: `T + N`.
    pub fn rows(&self) -> usize {
        self.t + self.tokens()
    }

    pub fn patch(&self) -> (usize, usize) {
        (self.height / self.grid_h, self.width / self.grid_w)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("classes", self.classes),
            ("frames", self.frames),
            ("height", self.height),
            ("width", self.width),
            ("t", self.t),
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("dim", self.dim),
            ("component_dim", self.component_dim),
            ("description_dim", self.description_dim),
            ("context_dim", self.context_dim),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::config(format!("`{name}` must be positive")));
            }
        }
        if self.classes < 2 {
            return Err(Error::config("`classes` must be at least 2"));
        }
        if self.frames % self.t != 0 {
            return Err(Error::config(format!(
                "frames ({}) must be a multiple of t ({})",
                self.frames, self.t
            )));
        }
        if self.height % self.grid_h != 0 || self.width % self.grid_w != 0 {
            return Err(Error::config(format!(
                "frame {}x{} does not tile into a {}x{} grid",
                self.height, self.width, self.grid_h, self.grid_w
            )));
        }
        let reals = [
            ("class_spread", self.class_spread),
            ("signal_amp", self.signal_amp),
            ("pixel_noise", self.pixel_noise),
            ("text_noise", self.text_noise),
            ("k_degradation", self.k_degradation),
            ("k_redundancy", self.k_redundancy),
        ];
        for (name, v) in reals {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!("`{name}` must be finite and >= 0")));
            }
        }
        if self.k_saturation == 0 {
            return Err(Error::config("`k_saturation` must be positive"));
        }
        Ok(())
    }
}

/// Hidden per-video variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentFactors {
    pub category: usize,
    pub components: Vec<f32>,
    pub description: Vec<f32>,
    pub context: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    /// `[frames, H, W, 3]`, values in `[0, 1]`.
    pub frames: Tensor,
    pub factors: LatentFactors,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Heldout,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Heldout => 2,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "heldout" => Ok(Split::Heldout),
            _ => Err(Error::config(format!("unknown split `{s}` (train|heldout)"))),
        }
    }
}

/// Class centroids, spatial patterns and frozen encoder stubs for one seed.
#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    /// `[classes, dim]` per factor group: components, description, context.
    centroids: [Tensor; 3],
    /// `[factor_dim, H * W * 3]` per factor group.
    patterns: [Tensor; 3],
    stubs: EncoderStubs,
}

fn unit(mut v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn gaussian_vec<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (z * std) as f32
        })
        .collect()
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let dims = [config.component_dim, config.description_dim, config.context_dim];
        let mut crng = rng::stream(config.seed, &[tag::CENTROIDS]);
        let centroids = dims.map(|d| {
            let mut data = Vec::with_capacity(config.classes * d);
            for _ in 0..config.classes {
                data.extend(unit(gaussian_vec(d, 1.0, &mut crng)));
            }
            Tensor::new(vec![config.classes, d], data).expect("centroid dims")
        });
        let pixels = config.height * config.width * 3;
        let mut prng = rng::stream(config.seed, &[tag::PATTERNS]);
        let patterns = dims.map(|d| Tensor::randn(&[d, pixels], 1.0, &mut prng));
        let stubs = EncoderStubs::new(&config)?;
        Ok(Self {
            config,
            centroids,
            patterns,
            stubs,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn stubs(&self) -> &EncoderStubs {
        &self.stubs
    }

    pub fn centroids(&self) -> &[Tensor; 3] {
        &self.centroids
    }

    /// `classes * n_per_class` videos, exactly `n_per_class` per class. Each
    /// sample's randomness derives from `(seed, split, index)` only.
    pub fn generate(&self, split: Split, n_per_class: usize) -> Result<Vec<SyntheticVideo>> {
        if n_per_class == 0 {
            return Err(Error::config("samples per class must be positive"));
        }
        let n = self.config.classes * n_per_class;
        (0..n).map(|i| self.sample(split, i)).collect()
    }

    fn sample(&self, split: Split, index: usize) -> Result<SyntheticVideo> {
        let cfg = &self.config;
        let mut r = rng::stream(cfg.seed, &[tag::SAMPLES, split.tag(), index as u64]);
        let category = index % cfg.classes;
        let draw = |g: usize, r: &mut rand_chacha::ChaCha8Rng| {
            let c = &self.centroids[g];
            let d = c.dims()[1];
            let centre = &c.data()[category * d..(category + 1) * d];
            let noise = gaussian_vec(d, cfg.class_spread / (d as f64).sqrt(), r);
            unit(centre.iter().zip(noise).map(|(a, b)| a + b).collect())
        };
        let factors = LatentFactors {
            category,
            components: draw(0, &mut r),
            description: draw(1, &mut r),
            context: draw(2, &mut r),
        };
        let frames = self.render(&factors, &mut r)?;
        Ok(SyntheticVideo {
            frames,
            label: category,
            factors,
        })
    }

    /// Per-frame signal: components fade out, the description fades in, the
    /// context is constant; plus clipped Gaussian pixel noise.
    fn render<R: Rng + ?Sized>(&self, f: &LatentFactors, r: &mut R) -> Result<Tensor> {
        let cfg = &self.config;
        let pixels = cfg.height * cfg.width * 3;
        let project = |g: usize, v: &[f32]| -> Vec<f32> {
            let p = self.patterns[g].data();
            let mut out = vec![0.0f32; pixels];
            for (k, &a) in v.iter().enumerate() {
                for (o, &b) in out.iter_mut().zip(&p[k * pixels..(k + 1) * pixels]) {
                    *o += a * b;
                }
            }
            out
        };
        let comp = project(0, &f.components);
        let desc = project(1, &f.description);
        let ctx = project(2, &f.context);
        let mut data = Vec::with_capacity(cfg.frames * pixels);
        for t in 0..cfg.frames {
            let phase = if cfg.frames > 1 {
                std::f64::consts::PI * t as f64 / (cfg.frames - 1) as f64
            } else {
                0.0
            };
            let wc = (0.5 * (1.0 + phase.cos())) as f32;
            let wd = (0.5 * (1.0 - phase.cos())) as f32;
            for p in 0..pixels {
                let z: f64 = StandardNormal.sample(r);
                let s = wc * comp[p] + wd * desc[p] + ctx[p];
                let v = 0.5 + cfg.signal_amp * s as f64 + cfg.pixel_noise * z;
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
        Tensor::new(vec![cfg.frames, cfg.height, cfg.width, 3], data)
    }

    /// The VLM + text-encoder path for one video: build the keyframe image,
    /// derive the description noise from its checksum and the keyframe
    /// count, and encode the factors the prompt asks about.
    pub fn describe(&self, video: &SyntheticVideo, k: usize, prompt: Prompt) -> Result<Tensor> {
        let image = extract_keyframes(video, k)?;
        let noise = TextNoise::for_keyframes(&self.config, &image);
        self.stubs.text_encode(&video.factors, prompt, &noise)
    }
}

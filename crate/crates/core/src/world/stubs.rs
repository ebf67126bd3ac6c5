use rand_distr::{Distribution, StandardNormal};

use super::{KeyframeImage, LatentFactors, WorldConfig};
use crate::error::{Error, Result};
use crate::prompt::Prompt;
use crate::rng::{self, tag};
use crate::tensor::Tensor;

/// Weight of the description factor in prompt C's input; the category
/// one-hot gets the remainder.
pub const DESCRIPTION_MIX: f32 = 0.7;

const TEXT_BIAS_STD: f64 = 0.3;

/// Frozen encoders. All weights are a pure function of the world seed.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStubs {
    pub seed: u64,
    frames: usize,
    height: usize,
    width: usize,
    t: usize,
    grid_h: usize,
    grid_w: usize,
    dim: usize,
    classes: usize,
    factor_dims: [usize; 3],
    /// `[ph * pw * 3, D]` patch embedding.
    pub visual_weight: Tensor,
    /// `[h * w, D]` per-position bias.
    pub visual_bias: Tensor,
    /// Per prompt: `[input_len, (T + N) * D]` weight and `[(T + N) * D]` bias.
    pub text: [(Tensor, Tensor); 4],
}

/// Corruption applied to a text embedding: fidelity mixes the clean signal
/// with an equally scaled random vector, sigma adds Gaussian noise. The
/// realization is keyed, so equal keys give equal noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextNoise {
    pub sigma: f64,
    pub fidelity: f64,
    pub key: u64,
}

impl TextNoise {
    pub fn clean() -> Self {
        Self {
            sigma: 0.0,
            fidelity: 1.0,
            key: 0,
        }
    }

    pub fn with_sigma(sigma: f64, key: u64) -> Self {
        Self {
            sigma,
            fidelity: 1.0,
            key,
        }
    }

    /// Keyframe channel: fewer keyframes than saturation lose fidelity,
    /// more add redundancy noise. The key is the keyframe checksum.
    pub fn for_keyframes(cfg: &WorldConfig, image: &KeyframeImage) -> Self {
        let sat = cfg.k_saturation as f64;
        let k = image.k as f64;
        let fidelity = (1.0 - cfg.k_degradation * (sat - k).max(0.0)).clamp(0.0, 1.0);
        let sigma = cfg.text_noise + cfg.k_redundancy * (k - sat).max(0.0);
        Self {
            sigma,
            fidelity,
            key: image.checksum64(),
        }
    }
}

impl EncoderStubs {
    pub fn new(cfg: &WorldConfig) -> Result<Self> {
        cfg.validate()?;
        let (ph, pw) = cfg.patch();
        let patch_len = ph * pw * 3;
        let mut vr = rng::stream(cfg.seed, &[tag::VISUAL_STUB]);
        let visual_weight = Tensor::randn(&[patch_len, cfg.dim], 1.0 / (patch_len as f64).sqrt(), &mut vr);
        let visual_bias = Tensor::randn(&[cfg.tokens(), cfg.dim], 0.1, &mut vr);
        let out = cfg.rows() * cfg.dim;
        let factor_dims = [cfg.component_dim, cfg.description_dim, cfg.context_dim];
        let inputs = [
            cfg.classes,
            cfg.component_dim,
            cfg.description_dim + cfg.classes,
            cfg.context_dim,
        ];
        let text = std::array::from_fn(|i| {
            let mut tr = rng::stream(cfg.seed, &[tag::TEXT_STUB, i as u64]);
            let w = Tensor::randn(&[inputs[i], out], 1.0 / (inputs[i] as f64).sqrt(), &mut tr);
            let b = Tensor::randn(&[out], TEXT_BIAS_STD, &mut tr);
            (w, b)
        });
        Ok(Self {
            seed: cfg.seed,
            frames: cfg.frames,
            height: cfg.height,
            width: cfg.width,
            t: cfg.t,
            grid_h: cfg.grid_h,
            grid_w: cfg.grid_w,
            dim: cfg.dim,
            classes: cfg.classes,
            factor_dims,
            visual_weight,
            visual_bias,
            text,
        })
    }

    /// Feature-map dims `[T, h, w, D]`.
    pub fn feature_dims(&self) -> [usize; 4] {
        [self.t, self.grid_h, self.grid_w, self.dim]
    }

    /// Text-embedding dims `[T + N, D]`.
    pub fn text_dims(&self) -> [usize; 2] {
        [self.t + self.grid_h * self.grid_w, self.dim]
    }

    /// Checksums of every stub tensor, in a fixed order.
    pub fn checksums(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("visual.weight".to_string(), self.visual_weight.checksum()),
            ("visual.bias".to_string(), self.visual_bias.checksum()),
        ];
        for (i, (w, b)) in self.text.iter().enumerate() {
            out.push((format!("text{}.weight", i + 1), w.checksum()));
            out.push((format!("text{}.bias", i + 1), b.checksum()));
        }
        out
    }

    /// Frames `[frames, H, W, 3]` to a feature map `[T, h, w, D]`: average
    /// pooling over groups of consecutive frames, then a shared patch
    /// embedding plus a per-position bias.
    pub fn visual_encode(&self, frames: &Tensor) -> Result<Tensor> {
        let expected = [self.frames, self.height, self.width, 3];
        if frames.dims() != expected {
            return Err(Error::shape("visual_encode", frames.dims(), &expected));
        }
        let group = self.frames / self.t;
        let (ph, pw) = (self.height / self.grid_h, self.width / self.grid_w);
        let patch_len = ph * pw * 3;
        let row = self.width * 3;
        let frame_len = self.height * row;
        let src = frames.data();
        let inv = 1.0 / group as f32;
        let tokens = self.grid_h * self.grid_w;
        let mut patches = vec![0.0f32; self.t * tokens * patch_len];
        for t in 0..self.t {
            for g in 0..group {
                let frame = &src[(t * group + g) * frame_len..(t * group + g + 1) * frame_len];
                for gy in 0..self.grid_h {
                    for gx in 0..self.grid_w {
                        let base = (t * tokens + gy * self.grid_w + gx) * patch_len;
                        for py in 0..ph {
                            for px in 0..pw {
                                for c in 0..3 {
                                    let p = frame[(gy * ph + py) * row + (gx * pw + px) * 3 + c];
                                    patches[base + (py * pw + px) * 3 + c] += (p - 0.5) * inv;
                                }
                            }
                        }
                    }
                }
            }
        }
        let patches = Tensor::new(vec![self.t * tokens, patch_len], patches)?;
        let mut m = patches.matmul(&self.visual_weight)?;
        let d = self.dim;
        let bias = self.visual_bias.data();
        for (i, row) in m.data_mut().chunks_mut(d).enumerate() {
            let pos = i % tokens;
            for (x, &b) in row.iter_mut().zip(&bias[pos * d..(pos + 1) * d]) {
                *x += b;
            }
        }
        m.reshape(&[self.t, self.grid_h, self.grid_w, d])
    }

    fn text_input(&self, f: &LatentFactors, prompt: Prompt) -> Result<Vec<f32>> {
        if f.category >= self.classes {
            return Err(Error::Contract(format!(
                "category {} out of range for {} classes",
                f.category, self.classes
            )));
        }
        let check = |v: &[f32], d: usize, what: &str| {
            if v.len() != d {
                Err(Error::Shape(format!("{what} factor has length {}, expected {d}", v.len())))
            } else {
                Ok(())
            }
        };
        let one_hot = |scale: f32| {
            let mut v = vec![0.0f32; self.classes];
            v[f.category] = scale;
            v
        };
        Ok(match prompt {
            Prompt::Category => one_hot(1.0),
            Prompt::Components => {
                check(&f.components, self.factor_dims[0], "components")?;
                f.components.clone()
            }
            Prompt::Description => {
                check(&f.description, self.factor_dims[1], "description")?;
                let mut v: Vec<f32> = f.description.iter().map(|x| DESCRIPTION_MIX * x).collect();
                v.extend(one_hot(1.0 - DESCRIPTION_MIX));
                v
            }
            Prompt::Context => {
                check(&f.context, self.factor_dims[2], "context")?;
                f.context.clone()
            }
        })
    }

    /// Text embedding `[T + N, D]` for one prompt, rows L2-normalized.
    pub fn text_encode(&self, f: &LatentFactors, prompt: Prompt, noise: &TextNoise) -> Result<Tensor> {
        let input = self.text_input(f, prompt)?;
        let (w, b) = &self.text[prompt.slot()];
        let x = Tensor::new(vec![1, input.len()], input)?;
        let mut raw = x.matmul(w)?.into_data();
        for (r, &bb) in raw.iter_mut().zip(b.data()) {
            *r += bb;
        }
        if noise.fidelity < 1.0 || noise.sigma > 0.0 {
            let mut nr = rng::stream(self.seed, &[tag::TEXT_NOISE, noise.key, prompt.index() as u64]);
            let keep = noise.fidelity.clamp(0.0, 1.0);
            let lost = (1.0 - keep * keep).sqrt();
            for r in raw.iter_mut() {
                let z1: f64 = StandardNormal.sample(&mut nr);
                let z2: f64 = StandardNormal.sample(&mut nr);
                *r = (keep * *r as f64 + lost * z1 + noise.sigma * z2) as f32;
            }
        }
        let [rows, d] = self.text_dims();
        Tensor::new(vec![rows, d], raw)?.l2_normalize_rows(1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Split, World};
    use super::*;

    fn cosine(a: &Tensor, b: &Tensor) -> f32 {
        a.dot(b).unwrap() / (a.l2_norm() * b.l2_norm())
    }

    #[test]
    fn visual_encode_shapes() {
        let cfg = WorldConfig { dim: 8, ..Default::default() };
        let w = World::new(cfg).unwrap();
        let v = &w.generate(Split::Train, 1).unwrap()[0];
        let m = w.stubs().visual_encode(&v.frames).unwrap();
        assert_eq!(m.dims(), &[4, 2, 2, 8]);
        assert!(w.stubs().visual_encode(&Tensor::zeros(&[8, 8, 8, 1])).is_err());
    }

    #[test]
    fn constant_video_gives_sample_independent_map() {
        let w = World::new(WorldConfig::default()).unwrap();
        let grey = Tensor::full(&[8, 8, 8, 3], 0.5);
        let m = w.stubs().visual_encode(&grey).unwrap();
        let m2 = w.stubs().visual_encode(&grey).unwrap();
        assert_eq!(m, m2);
        // centred input of 0.5 contributes nothing: only the bias survives
        let bias = w.stubs().visual_bias.data();
        for (i, row) in m.data().chunks(16).enumerate() {
            assert_eq!(row, &bias[(i % 4) * 16..(i % 4 + 1) * 16]);
        }
    }

    #[test]
    fn full_scale_token_count() {
        let cfg = WorldConfig {
            frames: 32,
            t: 32,
            height: 224,
            width: 224,
            grid_h: 16,
            grid_w: 16,
            dim: 1024,
            ..Default::default()
        };
        assert_eq!(cfg.tokens(), 256);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn text_embeddings_rows_are_unit_and_deterministic() {
        let w = World::new(WorldConfig::default()).unwrap();
        let vids = w.generate(Split::Train, 2).unwrap();
        for p in Prompt::ALL {
            let e = w.describe(&vids[0], 5, p).unwrap();
            assert_eq!(e.dims(), &[8, 16]);
            for row in e.data().chunks(16) {
                let n: f32 = row.iter().map(|x| x * x).sum::<f32>().sqrt();
                assert!((n - 1.0).abs() < 1e-5);
            }
            assert_eq!(e, w.describe(&vids[0], 5, p).unwrap());
        }
    }

    #[test]
    fn category_prompt_is_class_functional() {
        let w = World::new(WorldConfig::default()).unwrap();
        let vids = w.generate(Split::Train, 2).unwrap();
        let (a, b) = (&vids[0], &vids[10]);
        assert_eq!(a.label, b.label);
        let s = w.stubs();
        let clean = TextNoise::clean();
        assert_eq!(
            s.text_encode(&a.factors, Prompt::Category, &clean).unwrap(),
            s.text_encode(&b.factors, Prompt::Category, &clean).unwrap()
        );
        let ca = s.text_encode(&a.factors, Prompt::Context, &clean).unwrap();
        let cb = s.text_encode(&b.factors, Prompt::Context, &clean).unwrap();
        assert_ne!(a.factors.context, b.factors.context);
        assert!(cosine(&ca, &cb) < 1.0);
    }

    #[test]
    fn keyframe_channel_peaks_at_saturation() {
        let cfg = WorldConfig::default();
        let fid = |k: usize| {
            let img = KeyframeImage {
                pixels: Tensor::zeros(&[1, k, 3]),
                k,
                indices: vec![],
            };
            TextNoise::for_keyframes(&cfg, &img)
        };
        assert_eq!(fid(5).fidelity, 1.0);
        assert_eq!(fid(5).sigma, cfg.text_noise);
        assert!(fid(3).fidelity < 1.0 && fid(1).fidelity < fid(3).fidelity);
        assert!(fid(7).sigma > cfg.text_noise);
    }
}

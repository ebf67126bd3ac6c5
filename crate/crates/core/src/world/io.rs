//! Dataset + stub serialization: FTPT tensors plus a `manifest.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{EncoderStubs, LatentFactors, SyntheticVideo, WorldConfig};
use crate::error::{Error, Result};
use crate::ftpt;
use crate::manifest::Manifest;
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.txt";

/// Paths of the files written by [`save_dataset`].
#[derive(Clone, Debug)]
pub struct DatasetFiles {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

fn file_sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn put(dir: &Path, name: &str, t: &Tensor, m: &mut Manifest, files: &mut Vec<String>) -> Result<()> {
    let bytes = ftpt::encode(t)?;
    fs::write(dir.join(name), &bytes)?;
    m.push(&format!("checksum.{name}"), file_sha(&bytes));
    files.push(name.to_string());
    Ok(())
}

/// Writes `splits` (name, videos) and the stub weights under `dir`.
pub fn save_dataset(
    dir: &Path,
    cfg: &WorldConfig,
    stubs: &EncoderStubs,
    splits: &[(&str, &[SyntheticVideo])],
) -> Result<DatasetFiles> {
    fs::create_dir_all(dir)?;
    let mut m = Manifest::new();
    m.push("seed", cfg.seed);
    m.push("classes", cfg.classes);
    m.push(
        "dims",
        format!(
            "frames={} height={} width={} t={} grid_h={} grid_w={} dim={} factors={},{},{}",
            cfg.frames,
            cfg.height,
            cfg.width,
            cfg.t,
            cfg.grid_h,
            cfg.grid_w,
            cfg.dim,
            cfg.component_dim,
            cfg.description_dim,
            cfg.context_dim
        ),
    );
    m.push("text_noise", cfg.text_noise);
    m.push("splits", splits.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(","));
    let mut files = Vec::new();
    for (name, videos) in splits {
        let Some(first) = videos.first() else {
            return Err(Error::Contract(format!("split `{name}` is empty")));
        };
        let fdims = first.frames.dims().to_vec();
        let mut frames = Vec::new();
        let mut labels = Vec::new();
        let mut factors = Vec::new();
        for v in *videos {
            if v.frames.dims() != fdims.as_slice() {
                return Err(Error::shape("save_dataset", &fdims, v.frames.dims()));
            }
            frames.extend_from_slice(v.frames.data());
            labels.push(v.label as f32);
            factors.extend(&v.factors.components);
            factors.extend(&v.factors.description);
            factors.extend(&v.factors.context);
        }
        let n = videos.len();
        let mut dims = vec![n];
        dims.extend(&fdims);
        put(dir, &format!("{name}_frames.ftpt"), &Tensor::new(dims, frames)?, &mut m, &mut files)?;
        put(dir, &format!("{name}_labels.ftpt"), &Tensor::new(vec![n], labels)?, &mut m, &mut files)?;
        let fl = factors.len() / n;
        put(dir, &format!("{name}_factors.ftpt"), &Tensor::new(vec![n, fl], factors)?, &mut m, &mut files)?;
    }
    put(dir, "stub_visual_weight.ftpt", &stubs.visual_weight, &mut m, &mut files)?;
    put(dir, "stub_visual_bias.ftpt", &stubs.visual_bias, &mut m, &mut files)?;
    for (i, (w, b)) in stubs.text.iter().enumerate() {
        put(dir, &format!("stub_text{}_weight.ftpt", i + 1), w, &mut m, &mut files)?;
        put(dir, &format!("stub_text{}_bias.ftpt", i + 1), b, &mut m, &mut files)?;
    }
    m.write(&dir.join(MANIFEST))?;
    Ok(DatasetFiles {
        dir: dir.to_path_buf(),
        files,
    })
}

fn checked_read(dir: &Path, name: &str, m: &Manifest) -> Result<Tensor> {
    let bytes = fs::read(dir.join(name))?;
    let expected = m.require(&format!("checksum.{name}"))?;
    if file_sha(&bytes) != expected {
        return Err(Error::Format(format!("checksum mismatch for {name}")));
    }
    ftpt::decode(&bytes)
}

/// Reads one split written by [`save_dataset`]; factor vector lengths are
/// taken from `cfg`.
pub fn load_dataset(dir: &Path, split: &str, cfg: &WorldConfig) -> Result<Vec<SyntheticVideo>> {
    let m = Manifest::read(&dir.join(MANIFEST))?;
    let frames = checked_read(dir, &format!("{split}_frames.ftpt"), &m)?;
    let labels = checked_read(dir, &format!("{split}_labels.ftpt"), &m)?;
    let factors = checked_read(dir, &format!("{split}_factors.ftpt"), &m)?;
    let n = labels.len();
    let fl = cfg.component_dim + cfg.description_dim + cfg.context_dim;
    if frames.dims()[0] != n || factors.dims() != [n, fl] {
        return Err(Error::Shape(format!(
            "dataset {split}: frames {:?}, labels {:?}, factors {:?} disagree",
            frames.dims(),
            labels.dims(),
            factors.dims()
        )));
    }
    let fdims = frames.dims()[1..].to_vec();
    let per = frames.len() / n.max(1);
    let (a, b) = (cfg.component_dim, cfg.component_dim + cfg.description_dim);
    (0..n)
        .map(|i| {
            let f = &factors.data()[i * fl..(i + 1) * fl];
            let label = labels.data()[i] as usize;
            Ok(SyntheticVideo {
                frames: Tensor::new(fdims.clone(), frames.data()[i * per..(i + 1) * per].to_vec())?,
                factors: LatentFactors {
                    category: label,
                    components: f[..a].to_vec(),
                    description: f[a..b].to_vec(),
                    context: f[b..].to_vec(),
                },
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{Split, World};
    use super::*;

    #[test]
    fn save_then_load_recovers_videos() {
        let dir = tempfile::tempdir().unwrap();
        let w = World::new(WorldConfig::default()).unwrap();
        let train = w.generate(Split::Train, 1).unwrap();
        save_dataset(dir.path(), w.config(), w.stubs(), &[("train", &train)]).unwrap();
        let back = load_dataset(dir.path(), "train", w.config()).unwrap();
        assert_eq!(back, train);
        let m = Manifest::read(&dir.path().join(MANIFEST)).unwrap();
        assert_eq!(m.get("seed"), Some("1"));
        assert!(m.get("checksum.stub_text4_bias.ftpt").is_some());
    }

    #[test]
    fn tampered_file_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let w = World::new(WorldConfig::default()).unwrap();
        let train = w.generate(Split::Train, 1).unwrap();
        save_dataset(dir.path(), w.config(), w.stubs(), &[("train", &train)]).unwrap();
        let p = dir.path().join("train_labels.ftpt");
        let mut bytes = fs::read(&p).unwrap();
        *bytes.last_mut().unwrap() ^= 1;
        fs::write(&p, bytes).unwrap();
        assert!(load_dataset(dir.path(), "train", w.config()).is_err());
    }
}

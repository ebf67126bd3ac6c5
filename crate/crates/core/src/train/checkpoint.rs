//! Checkpoints: one FTPT file per parameter plus a `manifest.txt` with
//! provenance, model sizes, and a SHA-256 per file.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ftpt;
use crate::manifest::Manifest;
use crate::model::{FtpModel, ModelConfig};
use crate::params::{ParamGroup, ParamStore};
use crate::prompt::PromptSet;

pub const MANIFEST: &str = "manifest.txt";
const FORMAT: &str = "ftp-checkpoint/1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: u8,
    pub model: FtpModel,
    pub seed: u64,
    pub config_hash: String,
    pub prompts: PromptSet,
    pub keyframes: usize,
    /// Epoch the parameters come from (0 = initialization).
    pub epoch: usize,
    /// Content hash of the stage-1 checkpoint a stage-2 run started from.
    pub parent: Option<String>,
}

fn group_name(g: ParamGroup) -> String {
    match g {
        ParamGroup::Processor(i) => format!("processor{}", i + 1),
        ParamGroup::Integration => "integration".into(),
        ParamGroup::Classifier => "classifier".into(),
    }
}

fn parse_group(s: &str) -> Result<ParamGroup> {
    match s {
        "integration" => Ok(ParamGroup::Integration),
        "classifier" => Ok(ParamGroup::Classifier),
        _ => s
            .strip_prefix("processor")
            .and_then(|i| i.parse::<usize>().ok())
            .filter(|i| (1..=4).contains(i))
            .map(|i| ParamGroup::Processor(i - 1))
            .ok_or_else(|| Error::Format(format!("unknown parameter group `{s}`"))),
    }
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Checkpoint {
    /// Git-style content hash over parameter names and payload checksums.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (_, name, t) in self.model.params.iter() {
            h.update(name.as_bytes());
            h.update(b" ");
            h.update(t.checksum().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn provenance(&self) -> String {
        match (&self.parent, self.stage) {
            (Some(p), _) => format!("stage{} from stage1:{p}", self.stage),
            (None, 2) => "stage2 without feature processors".into(),
            (None, s) => format!("stage{s}"),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir)?;
        let c = &self.model.config;
        let mut m = Manifest::new();
        m.push("format", FORMAT);
        m.push("stage", self.stage);
        m.push("provenance", self.provenance());
        m.push("parent", self.parent.as_deref().unwrap_or("none"));
        m.push("seed", self.seed);
        m.push("config_hash", &self.config_hash);
        m.push("prompts", self.prompts);
        m.push("keyframes", self.keyframes);
        m.push("epoch", self.epoch);
        m.push("content_hash", self.content_hash());
        m.push("model.t", c.t);
        m.push("model.grid_h", c.grid_h);
        m.push("model.grid_w", c.grid_w);
        m.push("model.dim", c.dim);
        m.push("model.classes", c.classes);
        m.push("model.heads", c.heads);
        m.push("model.ffn_hidden", c.ffn_hidden);
        m.push("model.layer_norm_eps", c.layer_norm_eps);
        for (_, name, t) in self.model.params.iter() {
            let bytes = ftpt::encode(t)?;
            let file = format!("{name}.ftpt");
            fs::write(dir.join(&file), &bytes)?;
            let id = self.model.params.id(name).expect("own parameter");
            let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
            m.push(
                &format!("param.{name}"),
                format!("{} {} {}", group_name(self.model.params.group(id)), dims.join("x"), sha(&bytes)),
            );
        }
        m.write(&dir.join(MANIFEST))?;
        Ok(self.content_hash())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::config(format!("no checkpoint at {}", dir.display())));
        }
        let m = Manifest::read(&path)?;
        if m.require("format")? != FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format in {}", path.display())));
        }
        let num = |k: &str| -> Result<usize> {
            m.require(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad `{k}` in checkpoint manifest")))
        };
        let mut config = ModelConfig::new(
            num("model.t")?,
            num("model.grid_h")?,
            num("model.grid_w")?,
            num("model.dim")?,
            num("model.classes")?,
        );
        config.heads = num("model.heads")?;
        config.ffn_hidden = num("model.ffn_hidden")?;
        config.layer_norm_eps = m
            .require("model.layer_norm_eps")?
            .parse()
            .map_err(|_| Error::Format("bad layer_norm_eps".into()))?;
        let mut params = ParamStore::new();
        for e in m.entries() {
            let Some(name) = e.key.strip_prefix("param.") else {
                continue;
            };
            let parts: Vec<&str> = e.value.split_whitespace().collect();
            let [group, _dims, expect] = parts[..] else {
                return Err(Error::Format(format!("bad entry for `{name}`")));
            };
            let bytes = fs::read(dir.join(format!("{name}.ftpt")))?;
            if sha(&bytes) != expect {
                return Err(Error::Format(format!("checksum mismatch for parameter `{name}`")));
            }
            params.insert(name, parse_group(group)?, ftpt::decode(&bytes)?);
        }
        let model = FtpModel::from_params(config, params)?;
        let parent = match m.require("parent")? {
            "none" => None,
            p => Some(p.to_string()),
        };
        let ck = Self {
            stage: num("stage")? as u8,
            model,
            seed: m
                .require("seed")?
                .parse()
                .map_err(|_| Error::Format("bad seed".into()))?,
            config_hash: m.require("config_hash")?.to_string(),
            prompts: m.require("prompts")?.parse()?,
            keyframes: num("keyframes")?,
            epoch: num("epoch")?,
            parent,
        };
        if ck.content_hash() != m.require("content_hash")? {
            return Err(Error::Format("checkpoint content hash mismatch".into()));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            stage: 1,
            model: FtpModel::init(ModelConfig::new(4, 2, 2, 16, 10), 3).unwrap(),
            seed: 3,
            config_hash: "abc".into(),
            prompts: PromptSet::ALL,
            keyframes: 5,
            epoch: 30,
            parent: None,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ck = sample();
        let hash = ck.save(dir.path()).unwrap();
        let back = Checkpoint::load(dir.path()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.content_hash(), hash);
        let m = Manifest::read(&dir.path().join(MANIFEST)).unwrap();
        assert_eq!(m.get("provenance"), Some("stage1"));
        assert!(m.get("param.classifier.head.weight").unwrap().starts_with("classifier 16x10 "));
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        sample().save(a.path()).unwrap();
        sample().save(b.path()).unwrap();
        for e in fs::read_dir(a.path()).unwrap() {
            let name = e.unwrap().file_name();
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }

    #[test]
    fn corrupted_parameter_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path()).unwrap();
        let p = dir.path().join("integration.gain.ftpt");
        let mut bytes = fs::read(&p).unwrap();
        *bytes.last_mut().unwrap() ^= 0x40;
        fs::write(&p, bytes).unwrap();
        assert!(matches!(Checkpoint::load(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn missing_directory_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Checkpoint::load(&dir.path().join("nope")),
            Err(Error::Config { .. })
        ));
    }
}

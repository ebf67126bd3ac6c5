//! Four-tiered prompt (FTP) video classification at desk scale.
//!
//! A frozen visual encoder produces a feature map; four light-weight
//! feature processors are aligned to prompt-specific text embeddings with
//! a contrastive objective, then integrated back into the feature map and
//! fine-tuned with a two-block transformer classifier.

pub mod autograd;
pub mod error;
pub mod ftpt;
pub mod gradcheck;
pub mod harness;
pub mod manifest;
pub mod model;
pub mod objectives;
pub mod params;
pub mod prompt;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod world;

pub use autograd::{Graph, Var};
pub use error::{Error, Result};
pub use model::{FtpModel, ModelConfig};
pub use params::{ParamGroup, ParamId, ParamStore};
pub use prompt::{Prompt, PromptSet};
pub use tensor::{Scalar, Tensor};

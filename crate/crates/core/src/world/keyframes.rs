use sha2::{Digest, Sha256};

use super::SyntheticVideo;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `K` keyframes side by side: `[H, W * K, 3]`, band `j` is frame `indices[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyframeImage {
    pub pixels: Tensor,
    pub k: usize,
    pub indices: Vec<usize>,
}

impl KeyframeImage {
    /// First 8 bytes of the SHA-256 of the pixel payload.
    pub fn checksum64(&self) -> u64 {
        let digest = Sha256::digest(self.pixels.payload_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Equal-interval frame indices `round(j (frames - 1) / (k - 1))`; the
/// middle frame when `k == 1`.
pub fn keyframe_indices(frames: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > frames {
        return Err(Error::config(format!(
            "keyframe count {k} out of range 1..={frames}"
        )));
    }
    if k == 1 {
        return Ok(vec![((frames - 1) as f64 / 2.0).round() as usize]);
    }
    let span = (frames - 1) as f64;
    Ok((0..k)
        .map(|j| (j as f64 * span / (k - 1) as f64).round() as usize)
        .collect())
}

pub fn extract_keyframes(video: &SyntheticVideo, k: usize) -> Result<KeyframeImage> {
    keyframes_of(&video.frames, k)
}

/// Keyframe image of a raw `[frames, H, W, C]` clip.
pub fn keyframes_of(clip: &Tensor, k: usize) -> Result<KeyframeImage> {
    if clip.rank() != 4 {
        return Err(Error::Shape(format!("expected a [frames, H, W, C] clip, got {:?}", clip.dims())));
    }
    let dims = clip.dims();
    let (frames, h, w, c) = (dims[0], dims[1], dims[2], dims[3]);
    let indices = keyframe_indices(frames, k)?;
    let src = clip.data();
    let row = w * c;
    let mut data = Vec::with_capacity(h * row * k);
    for y in 0..h {
        for &f in &indices {
            let start = (f * h + y) * row;
            data.extend_from_slice(&src[start..start + row]);
        }
    }
    Ok(KeyframeImage {
        pixels: Tensor::new(vec![h, w * k, c], data)?,
        k,
        indices,
    })
}

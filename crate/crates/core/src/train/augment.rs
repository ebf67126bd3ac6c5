//! Frame-level augmentation: horizontal flip and a one-pixel random crop
//! (a shift with edge replication, so frame size is unchanged).

use rand::Rng;

use crate::tensor::Tensor;

/// Applies the enabled augmentations to `[frames, H, W, 3]`.
pub fn augment<R: Rng + ?Sized>(frames: &Tensor, flip: bool, crop: bool, rng: &mut R) -> Tensor {
    let do_flip = flip && rng.random_bool(0.5);
    let (dy, dx) = if crop {
        (rng.random_range(-1i64..=1), rng.random_range(-1i64..=1))
    } else {
        (0, 0)
    };
    if !do_flip && dy == 0 && dx == 0 {
        return frames.clone();
    }
    let [f, h, w, c] = [frames.dims()[0], frames.dims()[1], frames.dims()[2], frames.dims()[3]];
    let src = frames.data();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    Tensor::from_fn(&[f, h, w, c], |i| {
        let ch = i % c;
        let x = (i / c) % w;
        let y = (i / (c * w)) % h;
        let fr = i / (c * w * h);
        let x = if do_flip { w - 1 - x } else { x };
        let sy = clamp(y as i64 + dy, h);
        let sx = clamp(x as i64 + dx, w);
        src[((fr * h + sy) * w + sx) * c + ch]
    })
}

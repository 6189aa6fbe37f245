//! Shared fixtures for the criterion benchmarks.

use depthgate_core::{Shape, Support, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor(seed: u64, shape: Shape) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

/// Support with roughly `fraction` of positions set, chosen at random.
pub fn random_support(seed: u64, h: usize, w: usize, fraction: f64) -> Support {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..h * w).map(|_| rng.gen_bool(fraction)).collect();
    Support::new(h, w, bits).expect("support size")
}

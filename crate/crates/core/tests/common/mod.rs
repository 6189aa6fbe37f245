#![allow(dead_code)]

use depthgate_core::{ModelConfig, Preset, RawTensor, Shape, Tensor, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape, range: f32) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| rng.gen_range(-range..range))
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, _, _, _| rng.gen_range(0.0..1.0))
}

/// Seeded store with nonzero biases and varied PReLU slopes, so that every
/// parameter influences the output.
pub fn busy_weights(cfg: &ModelConfig, seed: u64) -> WeightStore {
    let mut rng = rng(seed);
    let mut store = WeightStore::new();
    for (name, dims) in cfg.param_layout().unwrap() {
        let n: usize = dims.iter().product();
        let data = if name.ends_with(".slopes") {
            (0..n).map(|_| rng.gen_range(0.0..0.5)).collect()
        } else if name.ends_with(".bias") {
            (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect()
        } else {
            let fan_in: usize = dims[1..].iter().product();
            let r = (3.0 / fan_in as f32).sqrt();
            (0..n).map(|_| rng.gen_range(-r..r)).collect()
        };
        store.insert(name, RawTensor::new(dims, data).unwrap());
    }
    store
}

/// Makes the adapter emit its maximum depth everywhere.
pub fn saturate_adapter(store: &mut WeightStore) {
    let b = store.get_mut("adapter.conv5.bias").unwrap();
    b.data.iter_mut().for_each(|v| *v = 1e4);
}

pub fn toy_edsr(blocks: usize) -> ModelConfig {
    ModelConfig {
        feat_channels: 16,
        blocks,
        adapter_channels: 8,
        ..ModelConfig::preset(Preset::Edsr, 2)
    }
}

pub fn toy_rcan(groups: usize, blocks: usize) -> ModelConfig {
    ModelConfig {
        feat_channels: 16,
        groups,
        blocks,
        ca_reduction: 4,
        adapter_channels: 8,
        ..ModelConfig::preset(Preset::Rcan, 2)
    }
}

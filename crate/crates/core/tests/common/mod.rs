#![allow(dead_code)]

use candle_core::{DType, Device, Tensor};
use exprgen::data::{EmotionSet, FrameImage};
use exprgen::model::{Discriminators, Generator, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn emotions(n: usize) -> EmotionSet {
    let names = ["happy", "angry", "sad", "surprised", "disgusted", "fearful"];
    EmotionSet::new(names[..n].iter().copied()).unwrap()
}

/// 16x16 input, three levels.
pub fn toy_config(n: usize) -> ModelConfig {
    ModelConfig::scaled(emotions(n), 16, 3, 4, 8)
}

pub fn toy_generator(n: usize, dtype: DType, seed: u64) -> Generator {
    Generator::new(toy_config(n), dtype, seed).unwrap()
}

pub fn toy_discriminators(n: usize, dtype: DType, seed: u64) -> Discriminators {
    Discriminators::new(&toy_config(n), dtype, seed).unwrap()
}

pub fn random_frame(size: usize, seed: u64) -> FrameImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..size * size * 3).map(|_| rng.random::<f32>()).collect();
    FrameImage::new(size, size, pixels).unwrap()
}

pub fn random_tensor(size: usize, seed: u64, dtype: DType) -> Tensor {
    random_frame(size, seed).to_tensor(&Device::Cpu, dtype).unwrap()
}

pub fn values(t: &Tensor) -> Vec<f64> {
    t.flatten_all().unwrap().to_dtype(DType::F64).unwrap().to_vec1::<f64>().unwrap()
}

#![allow(dead_code)]

use flowdeblur::synth::{generate_pair, synthetic_scene};
use flowdeblur::{FlowGenParams, Image, MotionFlowMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, c: usize, rng: &mut ChaCha8Rng) -> Image {
    Image::from_fn(w, h, c, |_, _, _| rng.random::<f32>()).unwrap()
}

pub fn random_flow(w: usize, h: usize, max: f32, rng: &mut ChaCha8Rng) -> MotionFlowMap {
    let n = w * h;
    let u = (0..n).map(|_| rng.random_range(-max..=max)).collect();
    let v = (0..n).map(|_| rng.random_range(-max..=max)).collect();
    MotionFlowMap::new(w, h, u, v).unwrap()
}

pub struct Pair {
    pub sharp: Image,
    pub blurred: Image,
    pub flow: MotionFlowMap,
}

/// Seed-fixed synthetic pairs: ceiling 23, noise σ 0.01.
pub fn synthetic_pairs(count: usize, size: usize, channels: usize) -> Vec<Pair> {
    (0..count as u64)
        .map(|i| {
            let sharp = synthetic_scene(size, size, channels, 1000 + i).unwrap();
            let params = FlowGenParams {
                ceiling: 23.0,
                noise_sigma: 0.01,
                seed: 2000 + i,
                ..FlowGenParams::default()
            };
            let (blurred, flow) = generate_pair(&sharp, &params).unwrap();
            Pair { sharp, blurred, flow }
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn bits(img: &Image) -> Vec<u32> {
    img.data().iter().map(|v| v.to_bits()).collect()
}

#![allow(dead_code)]

use quantscale::{Image, Mask};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random image up to `max_side` per side using at most `max_levels` grey values.
pub fn random_image(rng: &mut ChaCha8Rng, max_side: usize, max_levels: usize) -> Image {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let levels = rng.gen_range(1..=max_levels);
    let mut palette: Vec<u8> = (0..=255).collect();
    palette.shuffle(rng);
    palette.truncate(levels);
    let pixels = (0..w * h).map(|_| palette[rng.gen_range(0..levels)]).collect();
    Image::new(w, h, pixels).unwrap()
}

/// Random non-empty mask keeping roughly `density` of the pixels.
pub fn random_mask(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Mask {
    let mut idx: Vec<usize> = (0..n).filter(|_| rng.gen_bool(density)).collect();
    if idx.is_empty() {
        idx.push(rng.gen_range(0..n));
    }
    Mask::new(idx, n).unwrap()
}

/// Total squared error between two equal-size pixel slices.
pub fn sse(a: &[u8], b: &[u8]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| (i64::from(x) - i64::from(y)).pow(2)).sum()
}

/// Shannon entropy in bits, computed from scratch.
pub fn entropy_bits(values: &[u8]) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let n = values.len() as f64;
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum::<f64>().max(0.0)
}

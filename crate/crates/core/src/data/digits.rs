//! Synthetic 28×28 ten-class images with MNIST's layout, for machines without
//! the real files, plus the pixel-level shift used to build a second
//! distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
pub const CLASSES: usize = 10;

/// Class templates are fixed; only instance jitter depends on the seed.
const TEMPLATE_SEED: u64 = 0x5a3d_17c0_0d1e_0001;
const STROKES: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Stroke {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

fn templates() -> Vec<[Stroke; STROKES]> {
    let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    (0..CLASSES)
        .map(|_| {
            std::array::from_fn(|_| Stroke {
                x0: rng.gen_range(6.0..22.0),
                y0: rng.gen_range(6.0..22.0),
                x1: rng.gen_range(6.0..22.0),
                y1: rng.gen_range(6.0..22.0),
            })
        })
        .collect()
}

fn segment_distance(px: f64, py: f64, s: &Stroke) -> f64 {
    let (dx, dy) = (s.x1 - s.x0, s.y1 - s.y0);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - s.x0) * dx + (py - s.y0) * dy) / len2).clamp(0.0, 1.0) };
    ((px - s.x0 - t * dx).powi(2) + (py - s.y0 - t * dy).powi(2)).sqrt()
}

/// Quantized to multiples of 1/255 so the images survive an IDX round trip.
fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// `n` images, labels cycling through the ten classes.
pub fn gen_digit_images(n: usize, split: Split, seed: u64) -> Result<Dataset> {
    let tpl = templates();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).unwrap();
    let mut features = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % CLASSES;
        let (sx, sy): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let width: f64 = rng.gen_range(1.0..1.8);
        let ink: f64 = rng.gen_range(0.7..1.0);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let (px, py) = (x as f64 - sx, y as f64 - sy);
                let d = tpl[c].iter().map(|s| segment_distance(px, py, s)).fold(f64::INFINITY, f64::min);
                let v = ink * (-(d * d) / (2.0 * width * width)).exp() + noise.sample(&mut rng);
                features.push(quantize(v));
            }
        }
        labels.push(c);
    }
    Dataset::classification(split, PIXELS, CLASSES, features, labels)
}

/// Pixel-level distribution shift: a global brightness offset, a fixed random
/// per-pixel pattern scaled by `strength`, a per-class pattern scaled by
/// `label_strength`, and fresh noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageShift {
    pub brightness: f64,
    pub strength: f64,
    pub label_strength: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ImageShift {
    fn default() -> Self {
        ImageShift {
            brightness: 0.1,
            strength: 0.3,
            label_strength: 0.2,
            noise: 0.05,
            seed: 1,
        }
    }
}

pub fn shift_images(data: &Dataset, shift: &ImageShift, split: Split) -> Result<Dataset> {
    let (Some(features), Some(labels), Some(dim)) = (data.features(), data.labels(), data.feature_dim()) else {
        return Err(Error::data("image shift needs a classification dataset"));
    };
    if ![shift.brightness, shift.strength, shift.label_strength, shift.noise].iter().all(|v| v.is_finite()) || shift.noise < 0.0 {
        return Err(Error::arg("shift parameters must be finite with non-negative noise"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shift.seed);
    let classes = CLASSES.max(labels.iter().max().map_or(0, |m| m + 1));
    let pattern: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let per_class: Vec<f64> = (0..dim * classes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = Normal::new(0.0, shift.noise).unwrap();
    let mut out = Vec::with_capacity(features.len());
    for (row, &y) in features.chunks(dim).zip(labels) {
        let class_pattern = &per_class[y * dim..(y + 1) * dim];
        for ((v, p), q) in row.iter().zip(&pattern).zip(class_pattern) {
            let shifted = v + shift.brightness + shift.strength * p + shift.label_strength * q;
            out.push(quantize(shifted + noise.sample(&mut rng)));
        }
    }
    Dataset::classification(split, dim, classes, out, labels.to_vec())
}

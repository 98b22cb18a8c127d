//! Seeded synthetic datasets for benchmarks and end-to-end checks.
//!
//! Generation is deterministic for a given config: the RNG is keyed by
//! `seed` alone and every draw happens in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detection::{Detection, GroundTruthSet, PredictionSet};
use crate::geometry::BoundingBox;

const CANVAS: f64 = 1024.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Number of images.
    pub images: usize,
    /// Fraction of images that carry at least one true box.
    pub positives_fraction: f64,
    /// Number of simulated models.
    pub models: usize,
    /// RNG seed.
    pub seed: u64,
    /// Maximum absolute per-coordinate perturbation of a model's copy of a
    /// true box. Zero reproduces the truth exactly.
    pub jitter: f64,
    /// Chance that a model misses a true box entirely.
    pub drop_prob: f64,
    /// Chance that a model adds one unrelated box to an image.
    pub spurious_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            images: 100,
            positives_fraction: 0.6,
            models: 4,
            seed: 42,
            jitter: 8.0,
            drop_prob: 0.15,
            spurious_prob: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub ground_truth: GroundTruthSet,
    pub predictions: Vec<PredictionSet>,
}

pub fn generate(config: &SynthConfig) -> SynthDataset {
    assert!(config.models > 0, "at least one model");
    assert!(
        (0.0..=1.0).contains(&config.positives_fraction),
        "positives_fraction in [0, 1]"
    );
    assert!(config.jitter >= 0.0 && config.jitter.is_finite(), "jitter >= 0");
    assert!((0.0..=1.0).contains(&config.drop_prob), "drop_prob in [0, 1]");
    assert!(
        (0.0..=1.0).contains(&config.spurious_prob),
        "spurious_prob in [0, 1]"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ground_truth = GroundTruthSet::new();
    let mut predictions: Vec<PredictionSet> = (1..=config.models)
        .map(|m| PredictionSet::new(format!("model_{m}")))
        .collect();

    for i in 0..config.images {
        let image_id = format!("img{i:05}");
        let truth = if rng.random_bool(config.positives_fraction) {
            let count = rng.random_range(1..=2);
            (0..count).map(|_| random_box(&mut rng)).collect()
        } else {
            Vec::new()
        };

        for set in &mut predictions {
            let mut dets = Vec::new();
            for b in &truth {
                if config.drop_prob > 0.0 && rng.random_bool(config.drop_prob) {
                    continue;
                }
                let bbox = jittered(b, config.jitter, &mut rng);
                let score = rng.random_range(0.5..0.95);
                dets.push(Detection::new(bbox, score, set.model_id.clone()));
            }
            if config.spurious_prob > 0.0 && rng.random_bool(config.spurious_prob) {
                let bbox = random_box(&mut rng);
                let score = rng.random_range(0.5..0.75);
                dets.push(Detection::new(bbox, score, set.model_id.clone()));
            }
            set.entries.insert(image_id.clone(), dets);
        }

        ground_truth.entries.insert(image_id, truth);
    }

    SynthDataset {
        ground_truth,
        predictions,
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let width = rng.random_range(80.0..260.0);
    let height = rng.random_range(80.0..260.0);
    let x = rng.random_range(0.0..(CANVAS - width));
    let y = rng.random_range(0.0..(CANVAS - height));
    BoundingBox::from_xywh(x, y, width, height).expect("canvas boxes are valid")
}

fn jittered(b: &BoundingBox, jitter: f64, rng: &mut ChaCha8Rng) -> BoundingBox {
    if jitter == 0.0 {
        return *b;
    }
    let mut shift = |v: f64| (v + rng.random_range(-jitter..=jitter)).max(0.0);
    let x_min = shift(b.x_min());
    let y_min = shift(b.y_min());
    let mut x_max = shift(b.x_max());
    let mut y_max = shift(b.y_max());
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    BoundingBox::new(x_min, y_min, x_max, y_max).expect("jittered box keeps positive extent")
}

//! Synthetic paired-modality data with hidden class structure.
//!
//! Each sample draws a latent point near its class mean and projects it into
//! two observation spaces through fixed random linear maps plus
//! modality-specific noise. The class label exists only for evaluation: the
//! training path receives a stripped view.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::rng;

/// Generator parameters. The latent space has one axis per class; class
/// means sit at `separation` along their axis, so pairwise mean distances
/// are uniform at `separation·√2`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticConfig {
    pub classes: usize,
    pub samples: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    /// Distance of each class mean from the origin.
    pub separation: f64,
    /// Within-class latent noise scale.
    pub noise_sigma: f64,
    /// Observation noise added independently per modality.
    pub modality_noise: f64,
    /// Seed for the two projection maps, separate from the sample draws.
    pub map_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 10,
            samples: 2000,
            audio_dim: 32,
            visual_dim: 32,
            separation: 4.0,
            noise_sigma: 1.0,
            modality_noise: 0.5,
            map_seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.samples < self.classes {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "need at least one sample per class ({} < {})",
                self.samples,
                self.classes
            )));
        }
        if self.audio_dim == 0 || self.visual_dim == 0 {
            return Err(CoreError::InvalidConfig(
                "modality dimensions must be positive".into(),
            ));
        }
        if self.separation <= 0.0 || !self.separation.is_finite() {
            return Err(CoreError::InvalidConfig(
                "separation must be positive".into(),
            ));
        }
        // Zero is allowed so the degenerate no-noise case stays testable.
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(CoreError::InvalidConfig(
                "noise_sigma must be non-negative".into(),
            ));
        }
        if self.modality_noise < 0.0 || !self.modality_noise.is_finite() {
            return Err(CoreError::InvalidConfig(
                "modality_noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One paired sample; the class is evaluation-only.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPair {
    pub index: usize,
    pub audio: Vec<f64>,
    pub visual: Vec<f64>,
    pub class_id: usize,
}

/// The generated corpus plus the config that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: SyntheticConfig,
    pub seed: u64,
    pub pairs: Vec<LabeledPair>,
}

/// Inputs only — what the trainer is allowed to see.
#[derive(Clone, Copy, Debug)]
pub struct TrainView<'a> {
    pairs: &'a [LabeledPair],
}

impl<'a> TrainView<'a> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn audio(&self, i: usize) -> &'a [f64] {
        &self.pairs[i].audio
    }

    pub fn visual(&self, i: usize) -> &'a [f64] {
        &self.pairs[i].visual
    }
}

/// Class labels, handed only to evaluation and diagnostics code.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub classes: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Splits into the stripped training view and the evaluation-only labels.
    pub fn split(&self) -> (TrainView<'_>, GroundTruth) {
        (
            TrainView { pairs: &self.pairs },
            GroundTruth {
                classes: self.pairs.iter().map(|p| p.class_id).collect(),
                n_classes: self.config.classes,
            },
        )
    }

    pub fn view(&self) -> TrainView<'_> {
        TrainView { pairs: &self.pairs }
    }
}

/// Row-major projection matrix with `N(0, 1/√latent)` entries.
fn projection(rows: usize, latent: usize, rand: &mut ChaCha12Rng) -> Vec<f64> {
    let scale = 1.0 / crate::fmath::sqrt(latent as f64);
    (0..rows * latent)
        .map(|_| scale * rng::standard_normal(rand))
        .collect()
}

fn project(matrix: &[f64], rows: usize, latent: &[f64]) -> Vec<f64> {
    let cols = latent.len();
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &matrix[r * cols..(r + 1) * cols];
        out.push(crate::numeric::dot(row, latent));
    }
    out
}

/// Angular jitter of class-mean directions away from the orthogonal frame;
/// keeps some class pairs genuinely confusable at the default separation.
const MEAN_JITTER: f64 = 0.6;

/// Generates the dataset. Classes cycle round-robin so counts stay balanced
/// within one; each sample draws from its own counter-indexed substream, so
/// the result is independent of generation order.
pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let latent_dim = config.classes;

    let mut map_rng = ChaCha12Rng::seed_from_u64(rng::derive_seed(config.map_seed, "maps"));
    let audio_map = projection(config.audio_dim, latent_dim, &mut map_rng);
    let visual_map = projection(config.visual_dim, latent_dim, &mut map_rng);
    // Class means sit at radius `separation` along jittered axis directions.
    let mut means = Vec::with_capacity(config.classes);
    for class in 0..config.classes {
        let mut direction = rng::normal_vector(&mut map_rng, latent_dim);
        for d in &mut direction {
            *d *= MEAN_JITTER / crate::fmath::sqrt(latent_dim as f64);
        }
        direction[class] += 1.0;
        let norm = crate::fmath::sqrt(direction.iter().map(|x| x * x).sum::<f64>());
        for d in &mut direction {
            *d *= config.separation / norm;
        }
        means.push(direction);
    }

    let data_seed = rng::derive_seed(seed, "data");
    let mut pairs = Vec::with_capacity(config.samples);
    for index in 0..config.samples {
        let class_id = index % config.classes;
        let mut sample_rng = ChaCha12Rng::seed_from_u64(data_seed);
        sample_rng.set_stream(index as u64);

        let mut latent = means[class_id].clone();
        for l in &mut latent {
            *l += config.noise_sigma * rng::standard_normal(&mut sample_rng);
        }
        let mut audio = project(&audio_map, config.audio_dim, &latent);
        for a in &mut audio {
            *a += config.modality_noise * rng::standard_normal(&mut sample_rng);
        }
        let mut visual = project(&visual_map, config.visual_dim, &latent);
        for v in &mut visual {
            *v += config.modality_noise * rng::standard_normal(&mut sample_rng);
        }
        pairs.push(LabeledPair {
            index,
            audio,
            visual,
            class_id,
        });
    }
    Ok(Dataset {
        config: config.clone(),
        seed,
        pairs,
    })
}

/// Fraction of negatives whose hidden class equals the anchor's.
pub fn faulty_negative_rate(negative_classes: &[usize], anchor_class: usize) -> Result<f64> {
    if negative_classes.is_empty() {
        return Err(CoreError::EmptyCollection);
    }
    let faulty = negative_classes
        .iter()
        .filter(|&&c| c == anchor_class)
        .count();
    Ok(faulty as f64 / negative_classes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmath;
    use rand::Rng;

    #[test]
    fn zero_noise_collapses_each_class_to_a_point() {
        let config = SyntheticConfig {
            classes: 3,
            samples: 9,
            audio_dim: 5,
            visual_dim: 4,
            noise_sigma: 0.0,
            modality_noise: 0.0,
            ..SyntheticConfig::default()
        };
        let data = generate(&config, 1).unwrap();
        for pair in &data.pairs {
            let twin = &data.pairs[pair.class_id];
            assert_eq!(pair.class_id, twin.class_id);
            assert_eq!(pair.audio, twin.audio);
            assert_eq!(pair.visual, twin.visual);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let config = SyntheticConfig {
            samples: 50,
            ..SyntheticConfig::default()
        };
        let a = generate(&config, 42).unwrap();
        let b = generate(&config, 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&config, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn classes_are_balanced_when_divisible() {
        let config = SyntheticConfig {
            classes: 4,
            samples: 40,
            ..SyntheticConfig::default()
        };
        let data = generate(&config, 0).unwrap();
        let mut counts = [0usize; 4];
        for p in &data.pairs {
            counts[p.class_id] += 1;
        }
        assert_eq!(counts, [10, 10, 10, 10]);
    }

    #[test]
    fn nearest_class_mean_on_raw_features_is_accurate_at_high_separation() {
        // separation / sigma = 10.
        let config = SyntheticConfig {
            classes: 10,
            samples: 1000,
            separation: 10.0,
            noise_sigma: 1.0,
            modality_noise: 0.5,
            ..SyntheticConfig::default()
        };
        let data = generate(&config, 3).unwrap();
        // Oracle: per-class mean of the visual features, nearest-mean rule.
        let dim = config.visual_dim;
        let mut means = vec![vec![0.0; dim]; config.classes];
        let mut counts = vec![0usize; config.classes];
        for p in &data.pairs {
            counts[p.class_id] += 1;
            for (m, v) in means[p.class_id].iter_mut().zip(&p.visual) {
                *m += v;
            }
        }
        for (mean, count) in means.iter_mut().zip(&counts) {
            for m in mean.iter_mut() {
                *m /= *count as f64;
            }
        }
        let mut correct = 0usize;
        for p in &data.pairs {
            let best = (0..config.classes)
                .min_by(|&a, &b| {
                    let da: f64 = means[a]
                        .iter()
                        .zip(&p.visual)
                        .map(|(m, v)| (m - v) * (m - v))
                        .sum();
                    let db: f64 = means[b]
                        .iter()
                        .zip(&p.visual)
                        .map(|(m, v)| (m - v) * (m - v))
                        .sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            if best == p.class_id {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / data.len() as f64;
        assert!(accuracy > 0.99, "oracle accuracy {accuracy}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SyntheticConfig {
            classes: 1,
            ..SyntheticConfig::default()
        };
        assert!(matches!(
            generate(&bad, 0),
            Err(CoreError::InvalidConfig(_))
        ));
        let bad = SyntheticConfig {
            samples: 3,
            classes: 10,
            ..SyntheticConfig::default()
        };
        assert!(generate(&bad, 0).is_err());
        let bad = SyntheticConfig {
            separation: 0.0,
            ..SyntheticConfig::default()
        };
        assert!(generate(&bad, 0).is_err());
    }

    #[test]
    fn faulty_rate_boundary_cases() {
        assert_eq!(faulty_negative_rate(&[3, 3, 3], 3).unwrap(), 1.0);
        assert_eq!(faulty_negative_rate(&[1, 2, 4], 3).unwrap(), 0.0);
        assert_eq!(
            faulty_negative_rate(&[], 0),
            Err(CoreError::EmptyCollection)
        );
    }

    #[test]
    fn uniform_negatives_hit_the_anchor_class_at_chance() {
        let classes = 10usize;
        let mut rng = crate::rng::stream_rng(81, "faulty");
        let draws = 10_000;
        let negatives: alloc::vec::Vec<usize> =
            (0..draws).map(|_| rng.gen_range(0..classes)).collect();
        let rate = faulty_negative_rate(&negatives, 4).unwrap();
        let p = 1.0 / classes as f64;
        let sigma = fmath::sqrt(p * (1.0 - p) / draws as f64);
        assert!(fmath::abs(rate - p) < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn view_strips_labels_but_keeps_inputs() {
        let config = SyntheticConfig {
            samples: 20,
            ..SyntheticConfig::default()
        };
        let data = generate(&config, 5).unwrap();
        let (view, truth) = data.split();
        assert_eq!(view.len(), 20);
        assert_eq!(truth.classes.len(), 20);
        assert_eq!(view.audio(3), &data.pairs[3].audio[..]);
        assert_eq!(view.visual(7), &data.pairs[7].visual[..]);
    }
}

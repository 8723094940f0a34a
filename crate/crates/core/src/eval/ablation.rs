//! Reward-model data-size ablation on synthetic feature-level pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::reward::{fit, pairwise_accuracy, FeatureVector, NUM_FEATURES};

/// Hidden preference used to label synthetic pairs, one weight per reward
/// feature: shorter-ratio, numbers kept, polite and preferred forms good;
/// impolite, dispreferred and danger words bad; overlap mildly good.
pub const TRUE_WEIGHTS: [f64; NUM_FEATURES] = [-0.5, 1.0, 1.0, -1.0, 1.5, -1.5, -2.0, 0.5];

/// Random feature vectors labelled by a fixed linear utility.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPairs {
    pub weights: [f64; NUM_FEATURES],
    /// Probability of swapping chosen and rejected in training data.
    pub noise: f64,
    /// Minimum utility gap between the two sides of a pair.
    pub margin: f64,
}

impl Default for SyntheticPairs {
    fn default() -> Self {
        Self {
            weights: TRUE_WEIGHTS,
            noise: 0.1,
            margin: 0.1,
        }
    }
}

/// A feature vector shaped like real extractor output.
pub fn random_features(rng: &mut impl Rng) -> FeatureVector {
    let values = vec![
        rng.random_range(1.0..2.5),
        f64::from(u8::from(rng.random_bool(0.8))),
        f64::from(rng.random_range(0u8..=2)),
        f64::from(rng.random_range(0u8..=1)),
        f64::from(rng.random_range(0u8..=1)),
        f64::from(rng.random_range(0u8..=1)),
        f64::from(u8::from(rng.random_bool(0.1))),
        rng.random_range(0.0..1.0),
    ];
    FeatureVector::new(values).expect("synthetic features are well formed")
}

impl SyntheticPairs {
    fn utility(&self, f: &FeatureVector) -> f64 {
        self.weights.iter().zip(&f.values).map(|(w, x)| w * x).sum()
    }

    /// `count` (chosen, rejected) pairs; label noise applies when `noisy`.
    pub fn generate(&self, rng: &mut impl Rng, count: usize, noisy: bool) -> Vec<(FeatureVector, FeatureVector)> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (a, b) = (random_features(rng), random_features(rng));
            let gap = self.utility(&a) - self.utility(&b);
            if gap.abs() < self.margin {
                continue;
            }
            let (mut chosen, mut rejected) = if gap > 0.0 { (a, b) } else { (b, a) };
            if noisy && rng.random_bool(self.noise) {
                std::mem::swap(&mut chosen, &mut rejected);
            }
            out.push((chosen, rejected));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub generator: SyntheticPairs,
    pub trials: usize,
    pub heldout: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            generator: SyntheticPairs::default(),
            trials: 5,
            heldout: 1000,
            lr: 0.1,
            epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationPoint {
    pub size: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation over trials.
    pub spread: f64,
}

/// Held-out pairwise accuracy as a function of training-set size.
///
/// Within a trial the training sets are nested prefixes of one stream and
/// share a clean held-out set; trial `t` draws from seed `seed + t`.
pub fn ablation_curve(sizes: &[usize], config: &AblationConfig) -> Result<Vec<AblationPoint>, Error> {
    if sizes.is_empty() {
        return Err(Error::Invalid("ablation needs at least one size".into()));
    }
    if let Some(s) = sizes.iter().find(|s| **s < 2) {
        return Err(Error::Invalid(format!("ablation size {s} is below 2")));
    }
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid("ablation sizes must be ascending".into()));
    }
    if config.trials == 0 {
        return Err(Error::Invalid("ablation needs at least one trial".into()));
    }
    if !(0.0..=0.5).contains(&config.generator.noise) {
        return Err(Error::Invalid(format!("label noise {} is outside [0, 0.5]", config.generator.noise)));
    }
    let largest = *sizes.last().expect("non-empty");
    let mut acc = vec![Vec::with_capacity(config.trials); sizes.len()];
    for t in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
        let heldout = config.generator.generate(&mut rng, config.heldout, false);
        let train = config.generator.generate(&mut rng, largest, true);
        for (i, &size) in sizes.iter().enumerate() {
            let fitted = fit(&train[..size], config.lr, config.epochs)?;
            acc[i].push(pairwise_accuracy(&fitted.weights, &heldout));
        }
    }
    Ok(sizes
        .iter()
        .zip(acc)
        .map(|(&size, a)| {
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64;
            AblationPoint {
                size,
                mean_accuracy: mean,
                spread: var.sqrt(),
            }
        })
        .collect())
}

/// Number of adjacent decreases in a curve.
pub fn inversions(curve: &[AblationPoint]) -> usize {
    curve
        .windows(2)
        .filter(|w| w[1].mean_accuracy < w[0].mean_accuracy)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_margin_and_noise() {
        let g = SyntheticPairs::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let clean = g.generate(&mut rng, 500, false);
        assert!(clean.iter().all(|(c, r)| g.utility(c) - g.utility(r) >= g.margin));
        let noisy = g.generate(&mut rng, 4000, true);
        let flipped = noisy.iter().filter(|(c, r)| g.utility(c) < g.utility(r)).count();
        let rate = flipped as f64 / noisy.len() as f64;
        assert!((rate - 0.1).abs() < 0.02, "{rate}");
    }

    #[test]
    fn noiseless_curve_reaches_high_accuracy() {
        let cfg = AblationConfig {
            generator: SyntheticPairs {
                noise: 0.0,
                ..SyntheticPairs::default()
            },
            trials: 1,
            heldout: 500,
            ..AblationConfig::default()
        };
        let curve = ablation_curve(&[20, 2000], &cfg).unwrap();
        assert!(curve[1].mean_accuracy > curve[0].mean_accuracy, "{curve:?}");
        assert!(curve[1].mean_accuracy > 0.97, "{curve:?}");
    }

    #[test]
    fn rejects_bad_sizes() {
        let cfg = AblationConfig::default();
        assert!(ablation_curve(&[1, 10], &cfg).is_err());
        assert!(ablation_curve(&[10, 5], &cfg).is_err());
        assert!(ablation_curve(&[], &cfg).is_err());
    }
}

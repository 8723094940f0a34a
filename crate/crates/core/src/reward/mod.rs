//! Linear pairwise reward model over explicit translation features.
//!
//! `r(S, T) = w · f(S, T) + b`, trained with the Bradley-Terry loss
//! `-ln σ(r(S, T⁺) - r(S, T⁻))` by full-batch gradient descent from zero.

mod label;
mod rubric;

use std::collections::HashSet;
use std::sync::LazyLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::filters::{length_ratio, number_consistency, DangerWords};
use crate::lang::LanguageTag;
use crate::records::{CandidateSet, PreferencePair};

pub use label::{label_pairs, LabelOutcome, DEFAULT_MAX_PAIRS_PER_SET};
pub use rubric::{Lexicon, RewriteRule, Rubric, RubricHits};

pub const SCHEMA_VERSION: u32 = 1;

/// Feature order of schema version 1.
pub const FEATURE_NAMES: [&str; 8] = [
    "length_ratio",
    "number_consistent",
    "polite_hits",
    "impolite_hits",
    "preferred_hits",
    "dispreferred_hits",
    "danger_word",
    "trigram_overlap",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// Training aborts when the mean loss exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

static DANGER: LazyLock<DangerWords> = LazyLock::new(DangerWords::default);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_version: u32,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if values.len() != NUM_FEATURES {
            return Err(Error::Invalid(format!(
                "feature vector has {} values, schema {SCHEMA_VERSION} needs {NUM_FEATURES}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature value"));
        }
        Ok(Self {
            values,
            schema_version: SCHEMA_VERSION,
        })
    }

    fn check(&self) -> Result<(), Error> {
        if self.schema_version != SCHEMA_VERSION || self.values.len() != NUM_FEATURES {
            return Err(Error::SchemaMismatch {
                params: SCHEMA_VERSION,
                extractor: self.schema_version,
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature value"));
        }
        Ok(())
    }
}

fn trigrams(text: &str) -> HashSet<[char; 3]> {
    let chars: Vec<char> = std::iter::once(' ')
        .chain(text.chars().flat_map(char::to_lowercase))
        .chain(std::iter::once(' '))
        .collect();
    chars.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
}

/// `|A ∩ B| / min(|A|, |B|)` over character 3-gram sets.
pub fn overlap_coefficient(a: &str, b: &str) -> f64 {
    let (ga, gb) = (trigrams(a), trigrams(b));
    let min = ga.len().min(gb.len());
    if min == 0 {
        return 0.0;
    }
    ga.intersection(&gb).count() as f64 / min as f64
}

/// Schema v1 features; see [`FEATURE_NAMES`] for the order.
pub fn extract_features(
    source_text: &str,
    target_text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    rubric: &Rubric,
) -> Result<FeatureVector, Error> {
    rubric.require_coverage(tgt)?;
    let ratio = length_ratio(source_text, target_text)?.clamp(1.0, 5.0);
    let numbers = number_consistency(source_text, target_text).passed;
    let hits = rubric.hits(source_text, src, tgt, target_text);
    let danger = DANGER.find_plain(target_text).is_some();
    FeatureVector::new(vec![
        ratio,
        f64::from(u8::from(numbers)),
        f64::from(hits.polite),
        f64::from(hits.impolite),
        f64::from(hits.preferred),
        f64::from(hits.dispreferred),
        f64::from(u8::from(danger)),
        overlap_coefficient(source_text, target_text),
    ])
}

/// `-ln σ(gap)`, computed without overflow.
pub fn bt_loss_from_gap(gap: f64) -> f64 {
    let x = -gap;
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub pairs_seen: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub lr: f64,
    pub seed: u64,
    /// Mean loss before training and after every epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelParams {
    pub schema_version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub rubric_hash: String,
    pub training_meta: TrainingMeta,
}

impl RewardModelParams {
    pub fn zeros(rubric_hash: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            weights: vec![0.0; NUM_FEATURES],
            bias: 0.0,
            rubric_hash: rubric_hash.into(),
            training_meta: TrainingMeta {
                pairs_seen: 0,
                epochs: 0,
                final_loss: std::f64::consts::LN_2,
                lr: 0.0,
                seed: 0,
                loss_history: Vec::new(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                params: self.schema_version,
                extractor: SCHEMA_VERSION,
            });
        }
        if self.weights.len() != NUM_FEATURES {
            return Err(Error::Invalid(format!(
                "params carry {} weights, schema needs {NUM_FEATURES}",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::NonFinite("reward weight"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let p: Self = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("reward params: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// `r = w · f + b`.
    pub fn reward(&self, features: &FeatureVector) -> Result<f64, Error> {
        if features.schema_version != self.schema_version {
            return Err(Error::SchemaMismatch {
                params: self.schema_version,
                extractor: features.schema_version,
            });
        }
        features.check()?;
        Ok(dot(&self.weights, &features.values) + self.bias)
    }

    /// Fails unless these params were trained under `rubric`.
    pub fn require_rubric(&self, rubric: &Rubric) -> Result<(), Error> {
        let current = rubric.hash();
        if self.rubric_hash == current {
            Ok(())
        } else {
            Err(Error::RetrainRequired {
                trained: self.rubric_hash.clone(),
                current,
            })
        }
    }
}

/// Bradley-Terry loss of one labelled pair.
pub fn bt_loss(
    params: &RewardModelParams,
    features_chosen: &FeatureVector,
    features_rejected: &FeatureVector,
) -> Result<f64, Error> {
    let gap = params.reward(features_chosen)? - params.reward(features_rejected)?;
    Ok(bt_loss_from_gap(gap))
}

fn mean_loss(w: &[f64], deltas: &[Vec<f64>]) -> f64 {
    deltas.iter().map(|d| bt_loss_from_gap(dot(w, d))).sum::<f64>() / deltas.len() as f64
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub weights: Vec<f64>,
    pub loss_history: Vec<f64>,
}

/// Full-batch gradient descent on the mean pairwise loss, from zero weights.
/// The bias cancels in every score gap, so only weights move.
///
/// Summation runs in pair order, so results are bit-identical across runs
/// under IEEE-754 round-to-nearest-even.
pub fn fit(pairs: &[(FeatureVector, FeatureVector)], lr: f64, epochs: usize) -> Result<Fit, Error> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no preference pairs to train on".into()));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Invalid(format!("learning rate must be > 0, got {lr}")));
    }
    let mut deltas = Vec::with_capacity(pairs.len());
    for (c, r) in pairs {
        c.check()?;
        r.check()?;
        deltas.push(c.values.iter().zip(&r.values).map(|(a, b)| a - b).collect::<Vec<f64>>());
    }
    let n = deltas.len() as f64;
    let mut w = vec![0.0; NUM_FEATURES];
    let initial = mean_loss(&w, &deltas);
    let mut history = Vec::with_capacity(epochs + 1);
    history.push(initial);
    for epoch in 1..=epochs {
        let mut grad = vec![0.0; NUM_FEATURES];
        for d in &deltas {
            // d/dw of softplus(-w·d) is -σ(-w·d) d
            let g = -sigmoid(-dot(&w, d));
            for (gi, di) in grad.iter_mut().zip(d) {
                *gi += g * di;
            }
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= lr * gi / n;
        }
        let loss = mean_loss(&w, &deltas);
        history.push(loss);
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::Diverged { epoch, loss, initial });
        }
    }
    Ok(Fit {
        weights: w,
        loss_history: history,
    })
}

/// Trains reward params on labelled pairs.
///
/// Initialization is all zeros and descent is full-batch, so the result
/// does not depend on `seed`; it is recorded in the training metadata.
pub fn train(
    pairs: &[PreferencePair],
    rubric: &Rubric,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<RewardModelParams, Error> {
    if pairs.len() < 2 {
        return Err(Error::Invalid(format!(
            "training needs at least 2 preference pairs, got {}",
            pairs.len()
        )));
    }
    let features: Vec<(FeatureVector, FeatureVector)> = pairs
        .par_iter()
        .map(|p| {
            Ok((
                extract_features(&p.source_text, p.chosen(), &p.source_lang, &p.target_lang, rubric)?,
                extract_features(&p.source_text, p.rejected(), &p.source_lang, &p.target_lang, rubric)?,
            ))
        })
        .collect::<Result<_, Error>>()?;
    let fitted = fit(&features, lr, epochs)?;
    let mut params = RewardModelParams::zeros(rubric.hash());
    params.weights = fitted.weights;
    params.training_meta = TrainingMeta {
        pairs_seen: pairs.len(),
        epochs,
        final_loss: *fitted.loss_history.last().expect("history has the initial loss"),
        lr,
        seed,
        loss_history: fitted.loss_history,
    };
    Ok(params)
}

pub fn score(
    params: &RewardModelParams,
    source_text: &str,
    target_text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    rubric: &Rubric,
) -> Result<f64, Error> {
    if params.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            params: params.schema_version,
            extractor: SCHEMA_VERSION,
        });
    }
    let f = extract_features(source_text, target_text, src, tgt, rubric)?;
    params.reward(&f)
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn best_of_n(
    params: &RewardModelParams,
    set: &CandidateSet,
    rubric: &Rubric,
) -> Result<(usize, Vec<f64>), Error> {
    if set.candidates.is_empty() {
        return Err(Error::Invalid("candidate set is empty".into()));
    }
    let scores = set
        .candidates
        .iter()
        .map(|c| score(params, &set.source_text, &c.text, &set.source_lang, &set.target_lang, rubric))
        .collect::<Result<Vec<f64>, Error>>()?;
    let chosen = argmax_first(&scores).expect("non-empty");
    Ok((chosen, scores))
}

/// Share of pairs the weights rank correctly; ties count one half.
pub fn pairwise_accuracy(weights: &[f64], pairs: &[(FeatureVector, FeatureVector)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|(c, r)| {
            let gap = dot(weights, &c.values) - dot(weights, &r.values);
            if gap > 0.0 {
                1.0
            } else if gap == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    total / pairs.len() as f64
}

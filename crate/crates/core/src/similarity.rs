//! Embeddings, cosine similarity and the back-translation consistency filter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FilterName, FilterVerdict};
use crate::filters::Quarantine;
use crate::lang::LanguageTag;
use crate::providers::{translate, ProviderError, Translator};
use crate::util::fnv1a64;

pub const DEFAULT_DIM: usize = 512;
/// Seed of the n-gram hash. Changing it changes every builtin embedding.
pub const HASH_SEED: u64 = 0x5EED_0F_C0_51E5;
pub const NGRAM_ORDERS: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,

    #[error("embedding has non-finite components")]
    NonFinite,

    #[error("embedding is empty")]
    Empty,

    #[error("zero-norm embedding")]
    ZeroNorm,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn scaled(&self, k: f64) -> Result<Self, EmbedError> {
        Self::new(self.values.iter().map(|v| v * k).collect())
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

/// Hashed character n-gram term frequencies, L2-normalized.
///
/// Text is padded with one space on each side; every character 3-, 4- and
/// 5-gram is hashed with seeded FNV-1a into `dim` buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim: dim.max(1),
            seed: HASH_SEED,
        }
    }

    /// Bucket of every n-gram of `text`, in order.
    pub fn buckets(&self, text: &str) -> Vec<usize> {
        let chars: Vec<char> = std::iter::once(' ')
            .chain(text.chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut out = Vec::new();
        let mut buf = String::new();
        for n in NGRAM_ORDERS {
            for w in chars.windows(n) {
                buf.clear();
                buf.extend(w);
                out.push((fnv1a64(self.seed, buf.as_bytes()) % self.dim as u64) as usize);
            }
        }
        out
    }
}

impl Embedder for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut tf = vec![0.0; self.dim];
        for b in self.buckets(text) {
            tf[b] += 1.0;
        }
        let norm = tf.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        for v in &mut tf {
            *v /= norm;
        }
        EmbeddingVector::new(tf)
    }
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    if u.norm == 0.0 || v.norm == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    let nu2: f64 = u.values.iter().map(|a| a * a).sum();
    let nv2: f64 = v.values.iter().map(|b| b * b).sum();
    Ok((dot / (nu2 * nv2).sqrt()).clamp(-1.0, 1.0))
}

/// Language the two sides are compared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Back-translate the target into the source language.
    #[default]
    Source,
    /// Bring both sides into English.
    English,
}

impl std::str::FromStr for SimilarityMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source" => Ok(Self::Source),
            "english" => Ok(Self::English),
            other => Err(crate::Error::Config(format!("unknown similarity mode `{other}`"))),
        }
    }
}

/// `cos(embed(S'), embed(back-translation of T)) >= threshold`.
#[allow(clippy::too_many_arguments)]
pub fn similarity_filter(
    source_text: &str,
    target_text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    pivot: &dyn Translator,
    embedder: &dyn Embedder,
    threshold: f64,
    mode: SimilarityMode,
    english: &LanguageTag,
) -> Result<FilterVerdict, Quarantine> {
    let q = |what: &str, e: &dyn std::fmt::Display| {
        Quarantine::new(FilterName::Similarity, format!("{what}: {e}"))
    };
    let into = |text: &str, from: &LanguageTag, to: &LanguageTag| -> Result<String, Quarantine> {
        if from == to {
            return Ok(text.to_string());
        }
        translate(pivot, text, from, to, None)
            .map(|mut c| c.swap_remove(0))
            .map_err(|e| q("pivot failed", &e))
    };
    let (left, right) = match mode {
        SimilarityMode::Source => (source_text.to_string(), into(target_text, tgt, src)?),
        SimilarityMode::English => (into(source_text, src, english)?, into(target_text, tgt, english)?),
    };
    let el = embedder.embed(&left).map_err(|e| q("embedding failed", &e))?;
    let er = embedder.embed(&right).map_err(|e| q("embedding failed", &e))?;
    let sim = cosine(&el, &er).map_err(|e| q("cosine failed", &e))?;
    let verdict = if sim >= threshold {
        FilterVerdict::pass(FilterName::Similarity)
    } else {
        FilterVerdict::fail(FilterName::Similarity, format!("cosine {sim:.4} < {threshold}"))
    };
    Ok(verdict.with_measured(sim))
}

//! Character n-gram F-score.
//!
//! Whitespace is removed before extracting n-grams (orders 1 to 6).
//! Per order, precision and recall are combined with beta = 2; the score is
//! the mean F over the orders for which both sides have at least one
//! n-gram, times 100. Corpus scores sum the per-order statistics first.

use std::collections::HashMap;

use crate::error::Error;

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

/// Per-order (hypothesis n-grams, reference n-grams, matches).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChrfStats {
    pub orders: [(usize, usize, usize); CHRF_ORDER],
}

impl ChrfStats {
    pub fn add(&mut self, other: &ChrfStats) {
        for (a, b) in self.orders.iter_mut().zip(&other.orders) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
    }

    pub fn score(&self) -> f64 {
        let b2 = CHRF_BETA * CHRF_BETA;
        let mut total = 0.0;
        let mut effective = 0;
        for &(hyp, reference, matched) in &self.orders {
            if hyp == 0 || reference == 0 {
                continue;
            }
            effective += 1;
            let p = matched as f64 / hyp as f64;
            let r = matched as f64 / reference as f64;
            if p + r > 0.0 {
                total += (1.0 + b2) * p * r / (b2 * p + r);
            }
        }
        if effective == 0 {
            0.0
        } else {
            100.0 * total / effective as f64
        }
    }
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut m = HashMap::new();
    for w in chars.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

pub fn chrf_stats(hypothesis: &str, reference: &str) -> Result<ChrfStats, Error> {
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if r.is_empty() {
        return Err(Error::Invalid("chrF reference is empty".into()));
    }
    let h: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    let mut stats = ChrfStats::default();
    for n in 1..=CHRF_ORDER {
        let hc = ngram_counts(&h, n);
        let rc = ngram_counts(&r, n);
        let matched = hc
            .iter()
            .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
        stats.orders[n - 1] = (h.len().saturating_sub(n - 1), r.len().saturating_sub(n - 1), matched);
    }
    Ok(stats)
}

/// Sentence-level chrF in [0, 100].
pub fn chrf(hypothesis: &str, reference: &str) -> Result<f64, Error> {
    Ok(chrf_stats(hypothesis, reference)?.score())
}

/// Corpus-level chrF over (hypothesis, reference) pairs.
pub fn corpus_chrf<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<f64, Error> {
    let mut total = ChrfStats::default();
    for (h, r) in pairs {
        total.add(&chrf_stats(h, r)?);
    }
    Ok(total.score())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_disjoint_and_hand_case() {
        assert_eq!(chrf("the cat sat", "the cat sat").unwrap(), 100.0);
        assert_eq!(chrf("xyz", "abc").unwrap(), 0.0);
        // unigrams 2/3 each side, bigrams 1/2, trigram 0/1; orders 4-6 absent
        let expected = 100.0 * (2.0 / 3.0 + 0.5 + 0.0) / 3.0;
        assert!((chrf("abc", "abd").unwrap() - expected).abs() < 1e-12);
        assert!(chrf("abc", "  ").is_err());
        assert_eq!(chrf("", "abc").unwrap(), 0.0);
        assert_eq!(chrf("a b c ", "abc").unwrap(), 100.0);
    }

    #[test]
    fn recall_weighs_more_than_precision() {
        // hypothesis covers all of a short reference but adds noise
        let long = chrf("abcdefgh", "abcd").unwrap();
        // hypothesis is a precise prefix of a long reference
        let short = chrf("abcd", "abcdefgh").unwrap();
        assert!(long > short);
    }
}

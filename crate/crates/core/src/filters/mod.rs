//! Cleaning filters and the short-circuiting cascade.

mod cascade;
mod emoji;
mod number;

use std::path::Path;

use serde::Serialize;

use crate::corpus::{FilterName, FilterVerdict};
use crate::error::Error;
use crate::lang::{LanguageRegistry, LanguageTag};
use crate::providers::{translate, Translator};
use crate::similarity::SimilarityMode;
use crate::util::{parse_word_list, read_to_string};

pub use cascade::{run_cascade, CascadeDeps, CascadeOutcome, CascadeStatus, FilterStats};
pub use emoji::{emoji_preserved, EmojiList};
pub use number::{extract_numbers, normalize_number, number_consistency};

pub const DEFAULT_ALPHA_SAME_CLUSTER: f64 = 2.0;
pub const DEFAULT_ALPHA_CROSS_CLUSTER: f64 = 3.0;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.75;

/// Cheapest filters first.
pub const DEFAULT_CASCADE: [FilterName; 6] = [
    FilterName::Length,
    FilterName::Language,
    FilterName::DangerWords,
    FilterName::Emoji,
    FilterName::Number,
    FilterName::Similarity,
];

const BUILTIN_DANGER: &str = include_str!("../../data/danger_words.txt");

/// A filter could not reach a verdict because a dependency failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Quarantine {
    pub filter: FilterName,
    pub reason: String,
}

impl Quarantine {
    pub fn new(filter: FilterName, reason: impl Into<String>) -> Self {
        Self {
            filter,
            reason: reason.into(),
        }
    }
}

impl std::fmt::Display for Quarantine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} quarantined: {}", self.filter, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub alpha_same_cluster: f64,
    pub alpha_cross_cluster: f64,
    pub danger_words: DangerWords,
    pub emoji_list: EmojiList,
    pub similarity_threshold: f64,
    pub similarity_mode: SimilarityMode,
    pub cascade_order: Vec<FilterName>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha_same_cluster: DEFAULT_ALPHA_SAME_CLUSTER,
            alpha_cross_cluster: DEFAULT_ALPHA_CROSS_CLUSTER,
            danger_words: DangerWords::default(),
            emoji_list: EmojiList::default(),
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            similarity_mode: SimilarityMode::Source,
            cascade_order: DEFAULT_CASCADE.to_vec(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, alpha) in [
            ("alpha_same_cluster", self.alpha_same_cluster),
            ("alpha_cross_cluster", self.alpha_cross_cluster),
        ] {
            if !(alpha.is_finite() && alpha > 1.0) {
                return Err(Error::Config(format!("{name} must be a finite number > 1, got {alpha}")));
            }
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::Config(format!(
                "similarity_threshold must lie in [0, 1], got {}",
                self.similarity_threshold
            )));
        }
        let mut seen = Vec::new();
        for f in &self.cascade_order {
            if seen.contains(f) {
                return Err(Error::Config(format!("filter `{f}` appears twice in cascade_order")));
            }
            seen.push(*f);
        }
        Ok(())
    }

    /// Fingerprint-friendly view of the configuration.
    pub fn summary(&self) -> FilterConfigSummary {
        FilterConfigSummary {
            alpha_same_cluster: self.alpha_same_cluster,
            alpha_cross_cluster: self.alpha_cross_cluster,
            danger_words: self.danger_words.entries(),
            emoji_list: self.emoji_list.len(),
            similarity_threshold: self.similarity_threshold,
            similarity_mode: self.similarity_mode,
            cascade_order: self.cascade_order.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterConfigSummary {
    pub alpha_same_cluster: f64,
    pub alpha_cross_cluster: f64,
    pub danger_words: Vec<String>,
    pub emoji_list: usize,
    pub similarity_threshold: f64,
    pub similarity_mode: SimilarityMode,
    pub cascade_order: Vec<FilterName>,
}

/// `max(ℓS/ℓT, ℓT/ℓS)` with ℓ counting Unicode scalar values.
pub fn length_ratio(source_text: &str, target_text: &str) -> Result<f64, Error> {
    let ls = source_text.chars().count();
    let lt = target_text.chars().count();
    if ls == 0 || lt == 0 {
        return Err(Error::EmptyText);
    }
    let (hi, lo) = if ls >= lt { (ls, lt) } else { (lt, ls) };
    Ok(hi as f64 / lo as f64)
}

pub fn alpha_for(src: &LanguageTag, tgt: &LanguageTag, config: &FilterConfig) -> f64 {
    if src.same_cluster(tgt) {
        config.alpha_same_cluster
    } else {
        config.alpha_cross_cluster
    }
}

/// [`alpha_for`] over raw codes, rejecting unregistered languages.
pub fn alpha_for_codes(
    src: &str,
    tgt: &str,
    registry: &LanguageRegistry,
    config: &FilterConfig,
) -> Result<f64, Error> {
    Ok(alpha_for(&registry.tag(src)?, &registry.tag(tgt)?, config))
}

pub fn length_filter(
    source_text: &str,
    target_text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    config: &FilterConfig,
) -> Result<FilterVerdict, Error> {
    let ratio = length_ratio(source_text, target_text)?;
    let alpha = alpha_for(src, tgt, config);
    let verdict = if ratio <= alpha {
        FilterVerdict::pass(FilterName::Length)
    } else {
        FilterVerdict::fail(FilterName::Length, format!("ratio {ratio:.3} > alpha {alpha}"))
    };
    Ok(verdict.with_measured(ratio))
}

/// Danger-word list. Entries containing `{language}` are templates
/// instantiated with the English name of the target language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DangerWords {
    words: Vec<String>,
    templates: Vec<String>,
}

impl Default for DangerWords {
    fn default() -> Self {
        Self::parse(BUILTIN_DANGER)
    }
}

impl DangerWords {
    pub fn parse(text: &str) -> Self {
        Self::from_entries(parse_word_list(text))
    }

    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let (mut words, mut templates) = (Vec::new(), Vec::new());
        for e in entries {
            let e = e.as_ref().to_lowercase();
            if e.contains("{language}") {
                templates.push(e);
            } else {
                words.push(e);
            }
        }
        Self { words, templates }
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Ok(Self::parse(&read_to_string(path)?))
    }

    pub fn entries(&self) -> Vec<String> {
        self.words.iter().chain(&self.templates).cloned().collect()
    }

    /// First plain (non-template) word found in `text`.
    pub fn find_plain(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.words
            .iter()
            .find(|w| lower.contains(w.as_str()))
            .map(String::as_str)
    }

    /// First danger word found in `text`, templates instantiated for `lang`.
    pub fn find(&self, text: &str, registry: &LanguageRegistry, lang: &LanguageTag) -> Option<String> {
        let lower = text.to_lowercase();
        if let Some(w) = self.words.iter().find(|w| lower.contains(w.as_str())) {
            return Some(w.clone());
        }
        let name = registry.english_name(lang).to_lowercase();
        self.templates
            .iter()
            .map(|t| t.replace("{language}", &name))
            .find(|w| lower.contains(w.as_str()))
    }
}

/// Scans the English rendering of `target_text` for danger words.
///
/// Non-English targets go through `pivot` first. Without a pivot the raw
/// target is scanned and the verdict detail says so.
pub fn danger_word_scan(
    target_text: &str,
    target_lang: &LanguageTag,
    words: &DangerWords,
    registry: &LanguageRegistry,
    pivot: Option<&dyn Translator>,
) -> Result<FilterVerdict, Quarantine> {
    let (scanned, degraded) = if target_lang.is_english() {
        (target_text.to_string(), false)
    } else if let Some(pivot) = pivot {
        let english = registry.english();
        let out = translate(pivot, target_text, target_lang, &english, None)
            .map_err(|e| Quarantine::new(FilterName::DangerWords, format!("pivot failed: {e}")))?;
        (out.into_iter().next().unwrap_or_default(), false)
    } else {
        (target_text.to_string(), true)
    };
    let mode = if degraded { " (degraded: no pivot)" } else { "" };
    Ok(match words.find(&scanned, registry, target_lang) {
        Some(w) => FilterVerdict::fail(FilterName::DangerWords, format!("matched `{w}`{mode}")),
        None => FilterVerdict::pass(FilterName::DangerWords).with_detail(mode.trim()),
    })
}

use std::collections::BTreeMap;

use serde::Serialize;

use super::{danger_word_scan, emoji_preserved, length_filter, number_consistency, FilterConfig, Quarantine};
use crate::corpus::{CorpusEntry, FilterName, FilterVerdict};
use crate::error::Error;
use crate::lang::LanguageRegistry;
use crate::langid::{dual_check, LanguageDetector};
use crate::providers::Translator;
use crate::similarity::{similarity_filter, Embedder};

/// Collaborators some filters need. Missing ones are only an error when
/// the cascade actually reaches a filter that needs them; the danger-word
/// scan alone tolerates a missing pivot (degraded mode).
#[derive(Clone, Copy)]
pub struct CascadeDeps<'a> {
    pub registry: &'a LanguageRegistry,
    pub detectors: Option<(&'a dyn LanguageDetector, &'a dyn LanguageDetector)>,
    pub pivot: Option<&'a dyn Translator>,
    pub embedder: Option<&'a dyn Embedder>,
}

impl<'a> CascadeDeps<'a> {
    pub fn new(registry: &'a LanguageRegistry) -> Self {
        Self {
            registry,
            detectors: None,
            pivot: None,
            embedder: None,
        }
    }

    pub fn with_detectors(mut self, a: &'a dyn LanguageDetector, b: &'a dyn LanguageDetector) -> Self {
        self.detectors = Some((a, b));
        self
    }

    pub fn with_pivot(mut self, pivot: &'a dyn Translator) -> Self {
        self.pivot = Some(pivot);
        self
    }

    pub fn with_embedder(mut self, embedder: &'a dyn Embedder) -> Self {
        self.embedder = Some(embedder);
        self
    }

    /// Fails fast when a filter in `order` has no way to run.
    pub fn check(&self, order: &[FilterName]) -> Result<(), Error> {
        for f in order {
            let missing = match f {
                FilterName::Language if self.detectors.is_none() => Some("language detectors"),
                FilterName::Similarity if self.pivot.is_none() => Some("a pivot translator"),
                FilterName::Similarity if self.embedder.is_none() => Some("an embedder"),
                _ => None,
            };
            if let Some(m) = missing {
                return Err(Error::Config(format!("filter `{f}` needs {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CascadeStatus {
    Passed,
    Failed(FilterName),
    Quarantined(Quarantine),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    pub status: CascadeStatus,
    /// Verdicts of the filters evaluated, in cascade order.
    pub trail: Vec<FilterVerdict>,
}

impl CascadeOutcome {
    pub fn passed(&self) -> bool {
        self.status == CascadeStatus::Passed
    }
}

fn run_one(
    filter: FilterName,
    entry: &CorpusEntry,
    config: &FilterConfig,
    deps: &CascadeDeps<'_>,
) -> Result<FilterVerdict, Quarantine> {
    let (src_text, tgt_text) = (entry.source_text(), entry.target_text());
    let (src, tgt) = (entry.source_lang(), entry.target_lang());
    match filter {
        FilterName::Length => length_filter(src_text, tgt_text, src, tgt, config)
            .map_err(|e| Quarantine::new(filter, e.to_string())),
        FilterName::Language => {
            let (a, b) = deps.detectors.expect("checked by CascadeDeps::check");
            dual_check(tgt_text, tgt, a, b)
        }
        FilterName::DangerWords => {
            danger_word_scan(tgt_text, tgt, &config.danger_words, deps.registry, deps.pivot)
        }
        FilterName::Emoji => Ok(emoji_preserved(src_text, tgt_text, &config.emoji_list)),
        FilterName::Number => Ok(number_consistency(src_text, tgt_text)),
        FilterName::Similarity => similarity_filter(
            src_text,
            tgt_text,
            src,
            tgt,
            deps.pivot.expect("checked by CascadeDeps::check"),
            deps.embedder.expect("checked by CascadeDeps::check"),
            config.similarity_threshold,
            config.similarity_mode,
            &deps.registry.english(),
        ),
    }
}

/// Runs the configured filters in order, stopping at the first failure or
/// quarantine. The trail is always a prefix of `cascade_order`.
pub fn run_cascade(
    entry: &CorpusEntry,
    config: &FilterConfig,
    deps: &CascadeDeps<'_>,
) -> Result<CascadeOutcome, Error> {
    deps.check(&config.cascade_order)?;
    let mut trail = Vec::with_capacity(config.cascade_order.len());
    for &filter in &config.cascade_order {
        match run_one(filter, entry, config, deps) {
            Ok(v) => {
                let passed = v.passed;
                trail.push(v);
                if !passed {
                    return Ok(CascadeOutcome {
                        status: CascadeStatus::Failed(filter),
                        trail,
                    });
                }
            }
            Err(q) => {
                return Ok(CascadeOutcome {
                    status: CascadeStatus::Quarantined(q),
                    trail,
                })
            }
        }
    }
    Ok(CascadeOutcome {
        status: CascadeStatus::Passed,
        trail,
    })
}

/// Tally of cascade outcomes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterStats {
    pub input: usize,
    pub passed: usize,
    pub failed: BTreeMap<FilterName, usize>,
    pub quarantined: usize,
}

impl FilterStats {
    pub fn record(&mut self, outcome: &CascadeOutcome) {
        self.input += 1;
        match &outcome.status {
            CascadeStatus::Passed => self.passed += 1,
            CascadeStatus::Failed(f) => *self.failed.entry(*f).or_insert(0) += 1,
            CascadeStatus::Quarantined(_) => self.quarantined += 1,
        }
    }

    pub fn failed_total(&self) -> usize {
        self.failed.values().sum()
    }

    /// `input = passed + failures + quarantined`.
    pub fn balanced(&self) -> bool {
        self.input == self.passed + self.failed_total() + self.quarantined
    }
}

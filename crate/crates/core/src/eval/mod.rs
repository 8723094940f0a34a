//! Evaluation: chrF, rubric compliance, number accuracy, the benchmark
//! runner and the reward-model ablation.

pub mod ablation;
pub mod chrf;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

pub use ablation::{ablation_curve, inversions, AblationConfig, AblationPoint, SyntheticPairs, TRUE_WEIGHTS};
pub use chrf::{chrf, chrf_stats, corpus_chrf, ChrfStats};

use crate::corpus::{parse_corpus, CorpusEntry, ParseMode};
use crate::error::Error;
use crate::filters::number_consistency;
use crate::lang::{Direction, LanguageRegistry, LanguageTag};
use crate::pipeline::{route, ModelRegistry};
use crate::providers::{translate, Scorer, Translator};
use crate::reward::Rubric;

/// Share of entries whose target is rubric-compliant: at least one wanted
/// form and no unwanted one. Every target language must be covered. An
/// empty slice scores 1.0.
pub fn preference_score(entries: &[CorpusEntry], rubric: &Rubric) -> Result<f64, Error> {
    let items: Vec<_> = entries
        .iter()
        .map(|e| (e.source_text(), e.source_lang(), e.target_lang(), e.target_text()))
        .collect();
    preference_score_of(&items, rubric)
}

fn preference_score_of(items: &[(&str, &LanguageTag, &LanguageTag, &str)], rubric: &Rubric) -> Result<f64, Error> {
    for (_, _, tgt, _) in items {
        rubric.require_coverage(tgt)?;
    }
    if items.is_empty() {
        warn!("preference score of an empty corpus is defined as 1.0");
        return Ok(1.0);
    }
    let hits = items
        .iter()
        .filter(|(s, src, tgt, t)| rubric.hits(s, src, tgt, t).compliant())
        .count();
    Ok(hits as f64 / items.len() as f64)
}

/// Share of entries passing the number-consistency check. An empty slice
/// scores 1.0.
pub fn number_accuracy(entries: &[CorpusEntry]) -> f64 {
    let items: Vec<_> = entries.iter().map(|e| (e.source_text(), e.target_text())).collect();
    number_accuracy_of(&items)
}

fn number_accuracy_of(items: &[(&str, &str)]) -> f64 {
    if items.is_empty() {
        warn!("number accuracy of an empty corpus is defined as 1.0");
        return 1.0;
    }
    let ok = items
        .iter()
        .filter(|(s, t)| number_consistency(s, t).passed)
        .count();
    ok as f64 / items.len() as f64
}

/// Something that turns a source text into a translation.
pub trait TranslationSystem: Send + Sync {
    fn name(&self) -> &str;

    fn translate(&self, text: &str, src: &LanguageTag, tgt: &LanguageTag) -> Result<String, Error>;
}

/// Returns the source unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentitySystem;

impl TranslationSystem for IdentitySystem {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _: &LanguageTag, _: &LanguageTag) -> Result<String, Error> {
        Ok(text.to_string())
    }
}

/// Follows the routing plan, calling one translator per hop.
pub struct RoutedSystem<'a> {
    name: String,
    models: ModelRegistry,
    translator: &'a dyn Translator,
    english: LanguageTag,
}

impl<'a> RoutedSystem<'a> {
    pub fn new(name: impl Into<String>, models: ModelRegistry, translator: &'a dyn Translator, english: LanguageTag) -> Self {
        Self {
            name: name.into(),
            models,
            translator,
            english,
        }
    }

    pub fn plan(&self, src: &LanguageTag, tgt: &LanguageTag) -> Result<Vec<Direction>, Error> {
        route(src, tgt, &self.models, &self.english)
    }
}

impl TranslationSystem for RoutedSystem<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, text: &str, src: &LanguageTag, tgt: &LanguageTag) -> Result<String, Error> {
        let mut current = text.to_string();
        for hop in self.plan(src, tgt)? {
            current = translate(self.translator, &current, &hop.src, &hop.tgt, None)?.swap_remove(0);
        }
        Ok(current)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Chrf,
    Preference,
    NumberAccuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Chrf, Metric::Preference, Metric::NumberAccuracy];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Chrf => "chrf",
            Metric::Preference => "preference",
            Metric::NumberAccuracy => "number_accuracy",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}` (expected chrf, preference or number_accuracy)")))
    }
}

#[derive(Clone, Copy)]
pub struct EvalOptions<'a> {
    pub metrics: &'a [Metric],
    pub rubric: Option<&'a Rubric>,
    pub scorer: Option<&'a dyn Scorer>,
    pub config_hash: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionReport {
    /// Entries translated and scored.
    pub entries: usize,
    /// Entries the system failed on; excluded from scores.
    pub failed: usize,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub system: String,
    pub testset: String,
    pub config_hash: String,
    pub metrics: Vec<String>,
    pub entry_count: usize,
    pub failed_count: usize,
    pub directions: BTreeMap<String, DirectionReport>,
    /// Unweighted mean over directions.
    pub aggregate: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub omitted: Vec<String>,
}

/// Outcome of comparing a report with a stored golden report.
#[derive(Debug, Clone, PartialEq)]
pub enum GoldenCheck {
    Match,
    /// Scores or counts differ; the message names the first difference.
    Differs(String),
    /// The golden was produced under another configuration.
    Invalidated { golden: String, current: String },
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("eval report: {e}")))
    }

    /// Aligned plain-text table, one row per direction plus the mean.
    pub fn to_table(&self) -> String {
        let mut header = vec!["direction".to_string(), "entries".into(), "failed".into()];
        header.extend(self.metrics.iter().filter(|m| !self.omitted.contains(m)).cloned());
        let mut rows = vec![header];
        let cols = rows[0].len();
        for (d, r) in &self.directions {
            let mut row = vec![d.clone(), r.entries.to_string(), r.failed.to_string()];
            for m in &rows[0][3..] {
                row.push(r.scores.get(m).map_or("-".into(), |s| format!("{s:.4}")));
            }
            rows.push(row);
        }
        let mut mean = vec!["mean".to_string(), self.entry_count.to_string(), self.failed_count.to_string()];
        for m in &rows[0][3..] {
            mean.push(self.aggregate.get(m).map_or("-".into(), |s| format!("{s:.4}")));
        }
        rows.push(mean);
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("system: {}  testset: {}\n", self.system, self.testset);
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Compares against a golden report; scores within `tolerance`.
    pub fn check_golden(&self, golden: &EvalReport, tolerance: f64) -> GoldenCheck {
        if golden.config_hash != self.config_hash {
            return GoldenCheck::Invalidated {
                golden: golden.config_hash.clone(),
                current: self.config_hash.clone(),
            };
        }
        let same_shape = golden.system == self.system
            && golden.testset == self.testset
            && golden.metrics == self.metrics
            && golden.entry_count == self.entry_count
            && golden.failed_count == self.failed_count
            && golden.omitted == self.omitted
            && golden.directions.keys().eq(self.directions.keys());
        if !same_shape {
            return GoldenCheck::Differs("report shape or counts differ".into());
        }
        for (d, g) in &golden.directions {
            let r = &self.directions[d];
            if g.entries != r.entries || g.failed != r.failed || !g.scores.keys().eq(r.scores.keys()) {
                return GoldenCheck::Differs(format!("direction {d}: counts or metrics differ"));
            }
            for (m, gv) in &g.scores {
                if (gv - r.scores[m]).abs() > tolerance {
                    return GoldenCheck::Differs(format!("direction {d} {m}: golden {gv}, got {}", r.scores[m]));
                }
            }
        }
        GoldenCheck::Match
    }
}

struct Scored<'a> {
    entry: &'a CorpusEntry,
    hypothesis: Result<String, Error>,
}

/// Evaluates `system` on a corpus file whose targets are the references.
pub fn eval_run(
    testset: &Path,
    system: &dyn TranslationSystem,
    registry: &LanguageRegistry,
    options: &EvalOptions<'_>,
) -> Result<EvalReport, Error> {
    let file = File::open(testset).map_err(|e| Error::io(testset, e))?;
    let parsed = parse_corpus(BufReader::new(file), registry, ParseMode::Strict)
        .map_err(|e| Error::Invalid(format!("{}: {e}", testset.display())))?;
    let name = testset
        .file_stem()
        .map_or_else(|| testset.display().to_string(), |s| s.to_string_lossy().into_owned());
    eval_entries(&name, &parsed.entries, system, options)
}

pub fn eval_entries(
    testset: &str,
    entries: &[CorpusEntry],
    system: &dyn TranslationSystem,
    options: &EvalOptions<'_>,
) -> Result<EvalReport, Error> {
    if entries.is_empty() {
        return Err(Error::Invalid(format!("test set `{testset}` is empty")));
    }
    if options.metrics.is_empty() && options.scorer.is_none() {
        return Err(Error::Config("no metrics requested".into()));
    }
    if options.metrics.contains(&Metric::Preference) {
        let rubric = options
            .rubric
            .ok_or_else(|| Error::Config("the preference metric needs a rubric".into()))?;
        for e in entries {
            rubric.require_coverage(e.target_lang())?;
        }
    }

    let scored: Vec<Scored<'_>> = entries
        .par_iter()
        .map(|entry| Scored {
            entry,
            hypothesis: system.translate(entry.source_text(), entry.source_lang(), entry.target_lang()),
        })
        .collect();

    let mut by_direction: BTreeMap<String, (Vec<(&CorpusEntry, String)>, usize)> = BTreeMap::new();
    for s in scored {
        let key = format!("{}-{}", s.entry.source_lang(), s.entry.target_lang());
        let slot = by_direction.entry(key).or_default();
        match s.hypothesis {
            Ok(h) => slot.0.push((s.entry, h)),
            Err(e) => {
                warn!(system = system.name(), id = s.entry.id(), error = %e, "system failed; entry excluded");
                slot.1 += 1;
            }
        }
    }

    let mut metric_names: Vec<String> = options.metrics.iter().map(|m| m.as_str().to_string()).collect();
    let scorer_metric = options.scorer.map(|s| format!("external:{}", s.name()));
    metric_names.extend(scorer_metric.clone());

    let mut report = EvalReport {
        system: system.name().to_string(),
        testset: testset.to_string(),
        config_hash: options.config_hash.to_string(),
        metrics: metric_names,
        entry_count: 0,
        failed_count: 0,
        directions: BTreeMap::new(),
        aggregate: BTreeMap::new(),
        omitted: Vec::new(),
    };

    let mut scorer_ok = true;
    for (direction, (done, failed)) in &by_direction {
        let mut scores = BTreeMap::new();
        if !done.is_empty() {
            for m in options.metrics {
                let value = match m {
                    Metric::Chrf => corpus_chrf(done.iter().map(|(e, h)| (h.as_str(), e.target_text())))?,
                    Metric::Preference => {
                        let items: Vec<_> = done
                            .iter()
                            .map(|(e, h)| (e.source_text(), e.source_lang(), e.target_lang(), h.as_str()))
                            .collect();
                        preference_score_of(&items, options.rubric.expect("checked above"))?
                    }
                    Metric::NumberAccuracy => {
                        let items: Vec<_> = done.iter().map(|(e, h)| (e.source_text(), h.as_str())).collect();
                        number_accuracy_of(&items)
                    }
                };
                scores.insert(m.as_str().to_string(), value);
            }
            if let (Some(scorer), Some(name), true) = (options.scorer, &scorer_metric, scorer_ok) {
                let mut total = 0.0;
                for (e, h) in done {
                    match scorer.score(e.source_text(), h, e.target_text()) {
                        Ok(v) => total += v,
                        Err(err) => {
                            warn!(scorer = scorer.name(), error = %err, "external scorer failed; column omitted");
                            scorer_ok = false;
                            break;
                        }
                    }
                }
                if scorer_ok {
                    scores.insert(name.clone(), total / done.len() as f64);
                }
            }
        }
        report.entry_count += done.len();
        report.failed_count += failed;
        report.directions.insert(
            direction.clone(),
            DirectionReport {
                entries: done.len(),
                failed: *failed,
                scores,
            },
        );
    }
    if !scorer_ok {
        let name = scorer_metric.expect("scorer configured");
        for d in report.directions.values_mut() {
            d.scores.remove(&name);
        }
        report.omitted.push(name);
    }
    for m in &report.metrics {
        let values: Vec<f64> = report
            .directions
            .values()
            .filter_map(|d| d.scores.get(m).copied())
            .collect();
        if !values.is_empty() {
            report.aggregate.insert(m.clone(), values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn entry(r: &LanguageRegistry, tgt: &str, src_text: &str, tgt_text: &str) -> CorpusEntry {
        CorpusEntry::new(
            src_text,
            r.english(),
            tgt_text,
            r.tag(tgt).unwrap(),
            "t",
            Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn preference_counts() {
        let r = LanguageRegistry::builtin();
        let rubric = Rubric::builtin(&r);
        let polite = entry(&r, "es", "Can you send it?", "¿Podría enviarlo, por favor?");
        let rude = entry(&r, "es", "Can you send it?", "Oye, ¿puede enviarlo?");
        assert_eq!(preference_score(&[polite.clone(), polite.clone()], &rubric).unwrap(), 1.0);
        assert_eq!(preference_score(&[rude.clone()], &rubric).unwrap(), 0.0);
        assert_eq!(preference_score(&[polite, rude], &rubric).unwrap(), 0.5);
        let uncovered = entry(&r, "ko", "hi", "안녕하세요");
        assert!(preference_score(&[uncovered], &rubric).is_err());
    }

    #[test]
    fn number_accuracy_counts() {
        let r = LanguageRegistry::builtin();
        let ok = entry(&r, "es", "Order 12", "Pedido 12");
        let bad = entry(&r, "es", "Order 12", "Pedido 13");
        assert_eq!(number_accuracy(&[ok.clone(), ok.clone(), ok, bad]), 0.75);
        assert_eq!(number_accuracy(&[]), 1.0);
    }

    #[test]
    fn identity_on_copy_testset_is_perfect() {
        let r = LanguageRegistry::builtin();
        let entries = vec![entry(&r, "es", "same text", "same text"), entry(&r, "fr", "autre", "autre")];
        let opts = EvalOptions {
            metrics: &[Metric::Chrf, Metric::NumberAccuracy],
            rubric: None,
            scorer: None,
            config_hash: "h",
        };
        let rep = eval_entries("copy", &entries, &IdentitySystem, &opts).unwrap();
        for d in rep.directions.values() {
            assert_eq!(d.scores["chrf"], 100.0);
        }
        assert_eq!(rep.aggregate["chrf"], 100.0);
        assert!(rep.to_table().contains("en-fr"));
        assert_eq!(EvalReport::from_json(&rep.to_json()).unwrap(), rep);
        assert!(eval_entries("none", &[], &IdentitySystem, &opts).is_err());
    }

    #[test]
    fn golden_hash_mismatch_invalidates() {
        let r = LanguageRegistry::builtin();
        let entries = vec![entry(&r, "es", "abc", "abd")];
        let mk = |h| {
            eval_entries(
                "t",
                &entries,
                &IdentitySystem,
                &EvalOptions {
                    metrics: &[Metric::Chrf],
                    rubric: None,
                    scorer: None,
                    config_hash: h,
                },
            )
            .unwrap()
        };
        let a = mk("one");
        assert_eq!(a.check_golden(&a, 0.0), GoldenCheck::Match);
        assert!(matches!(mk("two").check_golden(&a, 0.0), GoldenCheck::Invalidated { .. }));
        let mut changed = a.clone();
        changed.directions.get_mut("en-es").unwrap().scores.insert("chrf".into(), 1.0);
        assert!(matches!(changed.check_golden(&a, 1e-9), GoldenCheck::Differs(_)));
    }

    struct Flaky;
    impl Scorer for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn score(&self, _: &str, h: &str, _: &str) -> Result<f64, crate::providers::ProviderError> {
            if h.contains("boom") {
                Err(crate::providers::ProviderError::Timeout { provider: "flaky".into() })
            } else {
                Ok(0.5)
            }
        }
    }

    #[test]
    fn scorer_failure_omits_column() {
        let r = LanguageRegistry::builtin();
        let opts = EvalOptions {
            metrics: &[Metric::Chrf],
            rubric: None,
            scorer: Some(&Flaky),
            config_hash: "h",
        };
        let fine = eval_entries("t", &[entry(&r, "es", "a b", "a b")], &IdentitySystem, &opts).unwrap();
        assert_eq!(fine.directions["en-es"].scores["external:flaky"], 0.5);
        let broken = eval_entries("t", &[entry(&r, "es", "a b", "a b"), entry(&r, "fr", "boom", "boom")], &IdentitySystem, &opts).unwrap();
        assert_eq!(broken.omitted, ["external:flaky"]);
        assert!(broken.directions.values().all(|d| !d.scores.contains_key("external:flaky")));
        assert!(broken.directions.values().all(|d| d.scores.contains_key("chrf")));
    }
}

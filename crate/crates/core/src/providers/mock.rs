//! Deterministic providers for tests and desk-scale runs.
//!
//! [`MockTranslator`] translates between the languages of a small phrase
//! book. Each sentence has neutral, polite and casual renderings per
//! language, with number and item slots. Text around a recognised sentence
//! is translated phrase-by-phrase through the book's meta phrases and
//! otherwise copied. In hallucinating mode a fraction of outputs (chosen by
//! a seeded hash of the request) gain a meta prefix such as
//! "My sentence is: ", which the danger-word filter is meant to catch.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::Deserialize;
use url::Url;

use super::{Judge, JudgeRequest, ProviderError, TranslateRequest, Translator, Winner};
use crate::filters::{length_ratio, number_consistency, DangerWords};
use crate::lang::{LanguageRegistry, LanguageTag};
use crate::records::LabelSource;
use crate::reward::Rubric;
use crate::util::fnv1a64;

pub const STYLES: [&str; 3] = ["neutral", "polite", "casual"];

const BUILTIN_BOOK: &str = include_str!("../../data/phrasebook.toml");

#[derive(Debug, Clone, Default, Deserialize)]
struct StyleVariants {
    neutral: String,
    #[serde(default)]
    polite: Option<String>,
    #[serde(default)]
    casual: Option<String>,
}

impl StyleVariants {
    fn get(&self, style: &str) -> &str {
        match style {
            "polite" => self.polite.as_deref().unwrap_or(&self.neutral),
            "casual" => self.casual.as_deref().unwrap_or(&self.neutral),
            _ => &self.neutral,
        }
    }

    fn all(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.neutral.as_str())
            .chain(self.polite.as_deref())
            .chain(self.casual.as_deref())
    }
}

#[derive(Debug, Clone, Deserialize)]
struct SentenceSpec {
    id: String,
    #[serde(flatten)]
    langs: BTreeMap<String, StyleVariants>,
}

#[derive(Debug, Clone, Deserialize)]
struct MetaSpec {
    id: String,
    #[serde(flatten)]
    langs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
struct BookSpec {
    #[serde(default)]
    sentence: Vec<SentenceSpec>,
    #[serde(default)]
    word: Vec<BTreeMap<String, String>>,
    #[serde(default)]
    meta: Vec<MetaSpec>,
}

struct Pattern {
    sentence: usize,
    regex: Regex,
}

/// Parsed phrase book with per-language matchers.
pub struct PhraseBook {
    spec: BookSpec,
    patterns: BTreeMap<String, Vec<Pattern>>,
}

impl std::fmt::Debug for PhraseBook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhraseBook")
            .field("sentences", &self.spec.sentence.len())
            .field("words", &self.spec.word.len())
            .field("meta", &self.spec.meta.len())
            .finish()
    }
}

/// A sentence found inside a text, with its slot values.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatch {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    slots: BTreeMap<&'static str, String>,
}

impl PhraseBook {
    pub fn builtin() -> Arc<PhraseBook> {
        Arc::new(Self::from_toml(BUILTIN_BOOK).expect("builtin phrase book parses"))
    }

    pub fn from_toml(text: &str) -> Result<Self, crate::Error> {
        let spec: BookSpec =
            toml::from_str(text).map_err(|e| crate::Error::Config(format!("phrase book: {e}")))?;
        let mut patterns: BTreeMap<String, Vec<Pattern>> = BTreeMap::new();
        for (idx, sentence) in spec.sentence.iter().enumerate() {
            for (lang, variants) in &sentence.langs {
                let words: Vec<&str> = spec
                    .word
                    .iter()
                    .filter_map(|w| w.get(lang).map(String::as_str))
                    .collect();
                for template in variants.all() {
                    let regex = template_regex(template, &words)?;
                    patterns.entry(lang.clone()).or_default().push(Pattern {
                        sentence: idx,
                        regex,
                    });
                }
            }
        }
        Ok(Self { spec, patterns })
    }

    pub fn sentence_ids(&self) -> impl Iterator<Item = &str> {
        self.spec.sentence.iter().map(|s| s.id.as_str())
    }

    pub fn languages(&self) -> Vec<String> {
        self.patterns.keys().cloned().collect()
    }

    /// Languages every sentence with slots is available in, excluding `en`.
    pub fn target_languages(&self) -> Vec<String> {
        let mut langs: Vec<String> = self.languages();
        langs.retain(|l| l != "en" && self.spec.sentence.iter().filter(|s| s.langs.len() > 2).all(|s| s.langs.contains_key(l)));
        langs
    }

    /// Longest sentence occurrence in `text` (earliest sentence wins ties).
    pub fn find_sentence(&self, text: &str, lang: &str) -> Option<SentenceMatch> {
        let mut best: Option<SentenceMatch> = None;
        for p in self.patterns.get(lang)? {
            let Some(caps) = p.regex.captures(text) else { continue };
            let whole = caps.get(0).unwrap();
            let better = best
                .as_ref()
                .is_none_or(|b| whole.len() > b.end - b.start);
            if better {
                let mut slots = BTreeMap::new();
                for slot in ["n", "m", "item"] {
                    if let Some(m) = caps.name(slot) {
                        slots.insert(slot, m.as_str().to_string());
                    }
                }
                best = Some(SentenceMatch {
                    sentence: p.sentence,
                    start: whole.start(),
                    end: whole.end(),
                    slots,
                });
            }
        }
        best
    }

    fn render(&self, m: &SentenceMatch, src: &str, tgt: &str, style: &str) -> Option<String> {
        let sentence = &self.spec.sentence[m.sentence];
        let template = sentence.langs.get(tgt)?.get(style);
        let mut out = template.to_string();
        for (slot, value) in &m.slots {
            let rendered = if *slot == "item" {
                self.translate_word(value, src, tgt)?
            } else {
                value.clone()
            };
            out = out.replace(&format!("{{{slot}}}"), &rendered);
        }
        Some(out)
    }

    fn translate_word(&self, word: &str, src: &str, tgt: &str) -> Option<String> {
        let lower = word.to_lowercase();
        self.spec
            .word
            .iter()
            .find(|w| w.get(src).is_some_and(|s| s.to_lowercase() == lower))
            .and_then(|w| w.get(tgt).cloned())
    }

    /// Replaces known meta phrases of `src` with their `tgt` equivalents.
    /// Returns the text and whether anything was replaced.
    fn translate_meta(&self, text: &str, src: &str, tgt: &str) -> (String, bool) {
        let mut out = text.to_string();
        let mut changed = false;
        for meta in &self.spec.meta {
            if let (Some(from), Some(to)) = (meta.langs.get(src), meta.langs.get(tgt)) {
                if out.contains(from.as_str()) {
                    out = out.replace(from.as_str(), to);
                    changed = true;
                }
            }
        }
        (out, changed)
    }

    pub fn meta_phrase(&self, id: &str, lang: &str) -> Option<&str> {
        self.spec
            .meta
            .iter()
            .find(|m| m.id == id)
            .and_then(|m| m.langs.get(lang))
            .map(String::as_str)
    }

    pub fn translate(&self, text: &str, src: &str, tgt: &str, style: &str) -> Option<String> {
        match self.find_sentence(text, src) {
            Some(m) => {
                let body = self.render(&m, src, tgt, style)?;
                let (prefix, _) = self.translate_meta(&text[..m.start], src, tgt);
                let (suffix, _) = self.translate_meta(&text[m.end..], src, tgt);
                Some(format!("{prefix}{body}{suffix}"))
            }
            None => match self.translate_meta(text, src, tgt) {
                (out, true) => Some(out),
                (_, false) => None,
            },
        }
    }

    /// Renders sentence `idx` in `lang`/`style` with explicit slot values.
    pub fn render_sentence(
        &self,
        idx: usize,
        lang: &str,
        style: &str,
        n: u32,
        m: u32,
        item: usize,
    ) -> Option<String> {
        let sentence = self.spec.sentence.get(idx)?;
        let template = sentence.langs.get(lang)?.get(style);
        let word = self.spec.word.get(item % self.spec.word.len().max(1))?;
        Some(
            template
                .replace("{n}", &n.to_string())
                .replace("{m}", &m.to_string())
                .replace("{item}", word.get(lang)?),
        )
    }

    pub fn sentence_count(&self) -> usize {
        self.spec.sentence.len()
    }

    pub fn word_count(&self) -> usize {
        self.spec.word.len()
    }

    /// Sentences available in `src` and all of `targets`.
    pub fn sentences_covering(&self, src: &str, targets: &[&str]) -> Vec<usize> {
        self.spec
            .sentence
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.langs.contains_key(src) && targets.iter().all(|t| s.langs.contains_key(*t))
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Seeded neutral source sentences in `lang` that translate into every
    /// language of `targets`. Numbers are 3-5 digits.
    pub fn sample_sources(&self, lang: &str, targets: &[&str], count: usize, seed: u64) -> Vec<String> {
        let usable = self.sentences_covering(lang, targets);
        assert!(!usable.is_empty(), "phrase book has no sentence covering {lang} -> {targets:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let idx = *usable.choose(&mut rng).unwrap();
                let n = rng.random_range(100..100_000);
                let m = rng.random_range(2..10);
                let item = rng.random_range(0..self.word_count());
                self.render_sentence(idx, lang, "neutral", n, m, item).unwrap()
            })
            .collect()
    }

    /// Training text per language: every sentence in every style with a
    /// few slot fillings, plus the meta phrases.
    pub fn language_samples(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, sentence) in self.spec.sentence.iter().enumerate() {
            for lang in sentence.langs.keys() {
                for style in STYLES {
                    let item = idx % self.word_count().max(1);
                    let text = self.render_sentence(idx, lang, style, 120 + 37 * idx as u32, 3, item).unwrap();
                    out.entry(lang.clone()).or_default().push(text);
                }
            }
        }
        for meta in &self.spec.meta {
            for (lang, phrase) in &meta.langs {
                out.entry(lang.clone()).or_default().push(phrase.trim().to_string());
            }
        }
        out
    }
}

fn template_regex(template: &str, words: &[&str]) -> Result<Regex, crate::Error> {
    let mut sorted: Vec<&str> = words.to_vec();
    sorted.sort_by_key(|w| std::cmp::Reverse(w.chars().count()));
    let item_alt = sorted
        .iter()
        .map(|w| regex::escape(w))
        .collect::<Vec<_>>()
        .join("|");
    let number = "[0-9]+(?:[.,][0-9]+)*";
    let mut pattern = String::from("(?i)");
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        pattern.push_str(&regex::escape(&rest[..open]));
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| crate::Error::Config(format!("unclosed slot in `{template}`")))?;
        match &rest[open + 1..close] {
            "n" => pattern.push_str(&format!("(?P<n>{number})")),
            "m" => pattern.push_str(&format!("(?P<m>{number})")),
            "item" if !item_alt.is_empty() => pattern.push_str(&format!("(?P<item>{item_alt})")),
            other => {
                return Err(crate::Error::Config(format!(
                    "unknown slot `{{{other}}}` in `{template}`"
                )))
            }
        }
        rest = &rest[close + 1..];
    }
    pattern.push_str(&regex::escape(rest));
    Regex::new(&pattern).map_err(|e| crate::Error::Config(format!("template `{template}`: {e}")))
}

/// How often the mock injects a hallucination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Hallucination {
    /// Percentage of requests affected, 0..=100.
    pub percent: u8,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HallucinationKind {
    SentenceIs,
    TranslationTo,
    Arrow,
}

#[derive(Debug, Clone)]
pub struct MockTranslator {
    name: String,
    book: Arc<PhraseBook>,
    hallucination: Hallucination,
    ignore_style: bool,
    default_style: String,
}

impl MockTranslator {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_book(name, PhraseBook::builtin())
    }

    pub fn with_book(name: impl Into<String>, book: Arc<PhraseBook>) -> Self {
        Self {
            name: name.into(),
            book,
            hallucination: Hallucination::default(),
            ignore_style: false,
            default_style: STYLES[0].to_string(),
        }
    }

    pub fn hallucinating(mut self, percent: u8, seed: u64) -> Self {
        self.hallucination = Hallucination {
            percent: percent.min(100),
            seed,
        };
        self
    }

    /// Renders every style as neutral, so all style requests agree.
    pub fn ignoring_style(mut self) -> Self {
        self.ignore_style = true;
        self
    }

    /// Style used when a request carries no style hint.
    pub fn with_default_style(mut self, style: &str) -> Result<Self, crate::Error> {
        if !STYLES.contains(&style) {
            return Err(crate::Error::Config(format!(
                "unknown mock style `{style}` (expected one of {})",
                STYLES.join(", ")
            )));
        }
        self.default_style = style.to_string();
        Ok(self)
    }

    pub fn book(&self) -> &Arc<PhraseBook> {
        &self.book
    }

    /// Builds from a `mock://` URL. Query keys: `hallucinate` (percent),
    /// `seed`, `ignore_style` (bool), `style` (default style).
    pub fn from_url(name: impl Into<String>, url: &Url) -> Result<Self, crate::Error> {
        let mut mock = Self::new(name);
        let mut percent = 0u8;
        let mut seed = 0u64;
        for (k, v) in url.query_pairs() {
            let bad = || crate::Error::Config(format!("mock url `{url}`: bad value for `{k}`"));
            match &*k {
                "hallucinate" => percent = v.parse().map_err(|_| bad())?,
                "seed" => seed = v.parse().map_err(|_| bad())?,
                "ignore_style" => mock.ignore_style = v.parse().map_err(|_| bad())?,
                "style" => mock = mock.with_default_style(&v)?,
                other => {
                    return Err(crate::Error::Config(format!(
                        "mock url `{url}`: unknown option `{other}`"
                    )))
                }
            }
        }
        Ok(mock.hallucinating(percent, seed))
    }

    /// Which hallucination, if any, this request receives.
    pub fn hallucination_for(&self, request: &TranslateRequest<'_>) -> Option<HallucinationKind> {
        if self.hallucination.percent == 0 {
            return None;
        }
        let key = format!(
            "{}\u{1f}{}\u{1f}{}\u{1f}{}",
            request.text,
            request.src,
            request.tgt,
            request.style.unwrap_or("")
        );
        let h = fnv1a64(self.hallucination.seed, key.as_bytes());
        if h % 100 >= u64::from(self.hallucination.percent) {
            return None;
        }
        Some(match (h / 100) % 3 {
            0 => HallucinationKind::SentenceIs,
            1 => HallucinationKind::TranslationTo,
            _ => HallucinationKind::Arrow,
        })
    }

    fn inject(&self, kind: HallucinationKind, text: String, tgt: &str) -> String {
        let prefix = match kind {
            HallucinationKind::SentenceIs => self.book.meta_phrase("sentence_is", tgt),
            HallucinationKind::TranslationTo => {
                self.book.meta_phrase(&format!("translation_to_{tgt}"), tgt)
            }
            HallucinationKind::Arrow => Some("-> "),
        };
        match prefix {
            Some(p) => format!("{p}{text}"),
            None => format!("-> {text}"),
        }
    }
}

impl Translator for MockTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, request: &TranslateRequest<'_>) -> Result<Vec<String>, ProviderError> {
        let style = if self.ignore_style {
            STYLES[0]
        } else {
            request.style.unwrap_or(&self.default_style)
        };
        let (src, tgt) = (request.src.code(), request.tgt.code());
        let out = self
            .book
            .translate(request.text, src, tgt, style)
            .ok_or_else(|| ProviderError::Unsupported {
                provider: self.name.clone(),
                message: format!("no phrase-book entry for {src}->{tgt} text"),
            })?;
        let out = match self.hallucination_for(request) {
            Some(kind) => self.inject(kind, out, tgt),
            None => out,
        };
        Ok(vec![out])
    }
}

/// A translator that always fails; for fault-injection tests.
#[derive(Debug, Clone)]
pub struct FailingTranslator {
    pub name: String,
    pub error: ProviderError,
}

impl FailingTranslator {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            error: ProviderError::Timeout {
                provider: name.clone(),
            },
            name,
        }
    }
}

impl Translator for FailingTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn translate(&self, _: &TranslateRequest<'_>) -> Result<Vec<String>, ProviderError> {
        Err(self.error.clone())
    }
}

/// Judge that applies the rubric lexicons directly.
///
/// Prefers the candidate with more preferred-form hits net of dispreferred
/// ones; ties fall to fewer danger words, then number consistency with the
/// source, then length ratio closer to 1, then lexicographic order.
#[derive(Debug, Clone)]
pub struct RuleJudge {
    rubric: Arc<Rubric>,
    registry: Arc<LanguageRegistry>,
    danger: DangerWords,
}

impl RuleJudge {
    pub fn new(rubric: Arc<Rubric>, registry: Arc<LanguageRegistry>) -> Self {
        Self {
            rubric,
            registry,
            danger: DangerWords::default(),
        }
    }

    fn key(&self, request: &JudgeRequest<'_>, text: &str) -> (i64, i64, i64, f64) {
        let hits = self
            .rubric
            .hits(request.source_text, request.source_lang, request.target_lang, text);
        let danger = self
            .danger
            .find(text, &self.registry, request.target_lang)
            .is_some();
        let numbers = number_consistency(request.source_text, text).passed;
        let ratio = length_ratio(request.source_text, text).unwrap_or(f64::INFINITY);
        (
            hits.net_preference(),
            -i64::from(danger),
            i64::from(numbers),
            -ratio,
        )
    }
}

impl Judge for RuleJudge {
    fn name(&self) -> &str {
        "rule-judge"
    }

    fn label_source(&self) -> LabelSource {
        LabelSource::RuleMock
    }

    fn judge(&self, request: &JudgeRequest<'_>) -> Result<Winner, ProviderError> {
        let ka = self.key(request, request.a);
        let kb = self.key(request, request.b);
        let ord = (ka.0, ka.1, ka.2)
            .cmp(&(kb.0, kb.1, kb.2))
            .then(ka.3.total_cmp(&kb.3))
            .then_with(|| request.b.cmp(request.a));
        Ok(if ord.is_ge() { Winner::A } else { Winner::B })
    }
}

/// Builds the tag pair for phrase-book lookups in tests and fixtures.
pub fn tags(registry: &LanguageRegistry, src: &str, tgt: &str) -> (LanguageTag, LanguageTag) {
    (registry.tag(src).unwrap(), registry.tag(tgt).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{length_filter, FilterConfig};
    use crate::providers::translate;

    fn reg() -> LanguageRegistry {
        LanguageRegistry::builtin()
    }

    #[test]
    fn hello_polite_is_deterministic() {
        let r = reg();
        let (en, es) = tags(&r, "en", "es");
        let mock = MockTranslator::new("dict");
        let a = translate(&mock, "Hello", &en, &es, Some("polite")).unwrap();
        let b = translate(&mock, "Hello", &en, &es, Some("polite")).unwrap();
        assert_eq!(a, vec!["Saludos".to_string()]);
        assert_eq!(a, b);
        assert_eq!(translate(&mock, "Hello", &en, &es, None).unwrap(), vec!["Hola"]);
    }

    #[test]
    fn slots_are_carried() {
        let r = reg();
        let (en, es) = tags(&r, "en", "es");
        let mock = MockTranslator::new("m");
        let out = translate(&mock, "The jacket costs 120 dollars.", &en, &es, Some("polite")).unwrap();
        assert_eq!(out, vec!["Estimado cliente, chaqueta cuesta 120 dólares."]);
        let back = translate(&mock, &out[0], &es, &en, None).unwrap();
        assert_eq!(back, vec!["The jacket costs 120 dollars."]);
    }

    #[test]
    fn every_style_back_translates_to_the_source() {
        let r = reg();
        let book = PhraseBook::builtin();
        let mock = MockTranslator::new("m");
        let en = r.english();
        let targets = book.target_languages();
        let target_refs: Vec<&str> = targets.iter().map(String::as_str).collect();
        for src_text in book.sample_sources("en", &target_refs, 60, 9) {
            for tgt in &targets {
                let tgt = r.tag(tgt).unwrap();
                for style in STYLES {
                    let out = translate(&mock, &src_text, &en, &tgt, Some(style)).unwrap();
                    let back = translate(&mock, &out[0], &tgt, &en, None).unwrap();
                    assert_eq!(back[0], src_text, "{tgt} {style}: {}", out[0]);
                }
            }
        }
    }

    #[test]
    fn all_styles_pass_the_length_filter() {
        let r = reg();
        let book = PhraseBook::builtin();
        let cfg = FilterConfig::default();
        let en = r.english();
        let targets = book.target_languages();
        for idx in book.sentences_covering("en", &["es", "fr", "de", "ja", "zh"]) {
            for tgt in &targets {
                let tag = r.tag(tgt).unwrap();
                for item in 0..book.word_count() {
                    for n in [100, 99_999] {
                        let src = book.render_sentence(idx, "en", "neutral", n, 2, item).unwrap();
                        for style in STYLES {
                            let t = book.render_sentence(idx, tgt, style, n, 2, item).unwrap();
                            let v = length_filter(&src, &t, &en, &tag, &cfg).unwrap();
                            assert!(v.passed, "{src} -> {t}: {:?}", v.measured);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hallucination_rate_is_seeded() {
        let r = reg();
        let (en, es) = tags(&r, "en", "es");
        let mock = MockTranslator::new("m").hallucinating(30, 5);
        let book = PhraseBook::builtin();
        let sources = book.sample_sources("en", &["es"], 400, 1);
        let count = |m: &MockTranslator| {
            sources
                .iter()
                .filter(|s| {
                    let req = TranslateRequest { text: s, src: &en, tgt: &es, style: None, n: 1 };
                    m.hallucination_for(&req).is_some()
                })
                .count()
        };
        let hits = count(&mock);
        assert_eq!(hits, count(&mock.clone()));
        assert!((80..=160).contains(&hits), "{hits}");
        assert_eq!(count(&MockTranslator::new("m")), 0);
        assert_eq!(count(&MockTranslator::new("m").hallucinating(100, 0)), 400);
    }

    #[test]
    fn hallucinated_prefix_pivots_to_english_danger_phrase() {
        let r = reg();
        let (en, es) = tags(&r, "en", "es");
        let mock = MockTranslator::new("pivot");
        let out = translate(&mock, "Traducción al español: Tu pedido 123 llegará en 3 días.", &es, &en, None).unwrap();
        assert_eq!(out[0], "Translation to Spanish: Your order 123 will arrive in 3 days.");
    }

    #[test]
    fn unknown_text_is_a_typed_error() {
        let r = reg();
        let (en, es) = tags(&r, "en", "es");
        let mock = MockTranslator::new("m");
        assert!(matches!(
            translate(&mock, "completely unrelated words", &en, &es, None),
            Err(ProviderError::Unsupported { .. })
        ));
    }

    #[test]
    fn ignoring_style_collapses_variants() {
        let r = reg();
        let (en, fr) = tags(&r, "en", "fr");
        let mock = MockTranslator::new("m").ignoring_style();
        let outs: Vec<_> = STYLES
            .iter()
            .map(|s| translate(&mock, "May I have your address?", &en, &fr, Some(s)).unwrap())
            .collect();
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn mock_url_options() {
        let url = Url::parse("mock://phrasebook?hallucinate=25&seed=4&ignore_style=true").unwrap();
        let m = MockTranslator::from_url("x", &url).unwrap();
        assert_eq!(m.hallucination, Hallucination { percent: 25, seed: 4 });
        assert!(m.ignore_style);
        assert!(MockTranslator::from_url("x", &Url::parse("mock://p?bogus=1").unwrap()).is_err());
        assert!(MockTranslator::from_url("x", &Url::parse("mock://p?style=rude").unwrap()).is_err());
        let r = reg();
        let polite = MockTranslator::from_url("x", &Url::parse("mock://p?style=polite").unwrap()).unwrap();
        let (en, es) = (r.english(), r.tag("es").unwrap());
        assert_eq!(
            translate(&polite, "Hello", &en, &es, None).unwrap(),
            translate(&MockTranslator::new("y"), "Hello", &en, &es, Some("polite")).unwrap()
        );
    }
}

//! Corpus entries, filter verdicts, and the JSON Lines corpus format.
//!
//! One entry per line:
//!
//! ```text
//! {"id":"…","src_lang":"en","tgt_lang":"es","src":"…","tgt":"…","provider":"…",
//!  "created_at":"2024-01-01T00:00:00Z","trail":[{"filter":"length","passed":true,"measured":1.2,"detail":""}]}
//! ```
//!
//! `id` is optional on input (recomputed and checked when present) and always
//! emitted. Keys not listed above are carried through untouched.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, ParseError, ParseErrorKind};
use crate::lang::{LanguageRegistry, LanguageTag};

/// Filters known to the cleaning cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterName {
    Length,
    Language,
    DangerWords,
    Emoji,
    Number,
    Similarity,
}

impl FilterName {
    pub const ALL: [FilterName; 6] = [
        FilterName::Length,
        FilterName::Language,
        FilterName::DangerWords,
        FilterName::Emoji,
        FilterName::Number,
        FilterName::Similarity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterName::Length => "length",
            FilterName::Language => "language",
            FilterName::DangerWords => "danger_words",
            FilterName::Emoji => "emoji",
            FilterName::Number => "number",
            FilterName::Similarity => "similarity",
        }
    }
}

impl fmt::Display for FilterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        FilterName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown filter `{s}`")))
    }
}

/// Outcome of one filter on one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterVerdict {
    pub filter: FilterName,
    pub passed: bool,
    pub measured: Option<f64>,
    pub detail: String,
}

impl FilterVerdict {
    pub fn pass(filter: FilterName) -> Self {
        Self {
            filter,
            passed: true,
            measured: None,
            detail: String::new(),
        }
    }

    pub fn fail(filter: FilterName, detail: impl Into<String>) -> Self {
        Self {
            filter,
            passed: false,
            measured: None,
            detail: detail.into(),
        }
    }

    pub fn with_measured(mut self, value: f64) -> Self {
        self.measured = Some(value);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Trim and NFC-normalize text before hashing.
pub fn normalize_text(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

/// Content hash over direction and normalized texts, hex encoded.
pub fn entry_id(
    source_lang: &LanguageTag,
    target_lang: &LanguageTag,
    source_text: &str,
    target_text: &str,
) -> Result<String, Error> {
    let src = normalize_text(source_text);
    let tgt = normalize_text(target_text);
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut hasher = Sha256::new();
    hasher.update(b"prefcorpus-entry-v1\0");
    for part in [source_lang.code(), target_lang.code(), &src, &tgt] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    Ok(hex::encode(hasher.finalize()))
}

/// One (source, target) pair with provenance and its filter trail.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    id: String,
    source_text: String,
    source_lang: LanguageTag,
    target_text: String,
    target_lang: LanguageTag,
    provider: String,
    created_at: DateTime<Utc>,
    trail: Vec<FilterVerdict>,
    extra: Map<String, Value>,
}

impl CorpusEntry {
    pub fn new(
        source_text: impl Into<String>,
        source_lang: LanguageTag,
        target_text: impl Into<String>,
        target_lang: LanguageTag,
        provider: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, Error> {
        let source_text = source_text.into();
        let target_text = target_text.into();
        if source_lang == target_lang {
            return Err(Error::SameLanguage(source_lang.code().to_string()));
        }
        let id = entry_id(&source_lang, &target_lang, &source_text, &target_text)?;
        Ok(Self {
            id,
            source_text,
            source_lang,
            target_text,
            target_lang,
            provider: provider.into(),
            created_at,
            trail: Vec::new(),
            extra: Map::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn source_text(&self) -> &str {
        &self.source_text
    }
    pub fn source_lang(&self) -> &LanguageTag {
        &self.source_lang
    }
    pub fn target_text(&self) -> &str {
        &self.target_text
    }
    pub fn target_lang(&self) -> &LanguageTag {
        &self.target_lang
    }
    pub fn provider(&self) -> &str {
        &self.provider
    }
    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
    pub fn trail(&self) -> &[FilterVerdict] {
        &self.trail
    }
    pub fn extra(&self) -> &Map<String, Value> {
        &self.extra
    }

    /// Replaces the trail. Filter names must be unique.
    pub fn set_trail(&mut self, trail: Vec<FilterVerdict>) -> Result<(), Error> {
        check_unique_filters(&trail).map_err(Error::Invalid)?;
        self.trail = trail;
        Ok(())
    }

    pub fn with_trail(mut self, trail: Vec<FilterVerdict>) -> Result<Self, Error> {
        self.set_trail(trail)?;
        Ok(self)
    }

    /// Sets an extra key. Reserved schema keys are rejected.
    pub fn set_extra(&mut self, key: impl Into<String>, value: Value) -> Result<(), Error> {
        let key = key.into();
        if RESERVED_KEYS.contains(&key.as_str()) {
            return Err(Error::Invalid(format!("`{key}` is a reserved corpus key")));
        }
        self.extra.insert(key, value);
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.clone()));
        obj.insert("src_lang".into(), self.source_lang.code().into());
        obj.insert("tgt_lang".into(), self.target_lang.code().into());
        obj.insert("src".into(), Value::String(self.source_text.clone()));
        obj.insert("tgt".into(), Value::String(self.target_text.clone()));
        obj.insert("provider".into(), Value::String(self.provider.clone()));
        obj.insert(
            "created_at".into(),
            Value::String(self.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
        );
        let trail = self
            .trail
            .iter()
            .map(|v| {
                let mut t = Map::new();
                t.insert("filter".into(), v.filter.as_str().into());
                t.insert("passed".into(), v.passed.into());
                t.insert(
                    "measured".into(),
                    v.measured
                        .and_then(serde_json::Number::from_f64)
                        .map(Value::Number)
                        .unwrap_or(Value::Null),
                );
                t.insert("detail".into(), Value::String(v.detail.clone()));
                Value::Object(t)
            })
            .collect();
        obj.insert("trail".into(), Value::Array(trail));
        for (k, v) in &self.extra {
            obj.insert(k.clone(), v.clone());
        }
        Value::Object(obj)
    }

    /// Serializes to a single JSON line (no trailing newline).
    pub fn to_line(&self) -> String {
        self.to_json().to_string()
    }
}

const RESERVED_KEYS: [&str; 8] = [
    "id",
    "src_lang",
    "tgt_lang",
    "src",
    "tgt",
    "provider",
    "created_at",
    "trail",
];

/// Provider recorded when an input line has none.
pub const DEFAULT_PROVIDER: &str = "external";

fn check_unique_filters(trail: &[FilterVerdict]) -> Result<(), String> {
    for (i, v) in trail.iter().enumerate() {
        if trail[..i].iter().any(|w| w.filter == v.filter) {
            return Err(format!("filter `{}` appears twice in trail", v.filter));
        }
        if let Some(m) = v.measured {
            if !m.is_finite() {
                return Err(format!("non-finite measurement for `{}`", v.filter));
            }
        }
    }
    Ok(())
}

/// Parses one corpus line. `line_no` is 1-based and only used for errors.
pub fn parse_line(
    line: &str,
    line_no: usize,
    registry: &LanguageRegistry,
) -> Result<CorpusEntry, ParseError> {
    let err = |kind| ParseError {
        line: line_no,
        kind,
    };
    let value: Value = serde_json::from_str(line)
        .map_err(|e| err(ParseErrorKind::MalformedJson(e.to_string())))?;
    let Value::Object(mut obj) = value else {
        return Err(err(ParseErrorKind::Invalid("record is not a JSON object".into())));
    };

    let mut take_str = |key: &str, required: bool| -> Result<Option<String>, ParseError> {
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(Some(s)),
            Some(Value::Null) | None if !required => Ok(None),
            None | Some(Value::Null) => Err(err(ParseErrorKind::MissingField(key.to_string()))),
            Some(_) => Err(err(ParseErrorKind::Invalid(format!("`{key}` must be a string")))),
        }
    };
    let id = take_str("id", false)?;
    let src_lang = take_str("src_lang", true)?.unwrap();
    let tgt_lang = take_str("tgt_lang", true)?.unwrap();
    let src = take_str("src", true)?.unwrap();
    let tgt = take_str("tgt", true)?.unwrap();
    let provider = take_str("provider", false)?.unwrap_or_else(|| DEFAULT_PROVIDER.to_string());
    let created_at = match take_str("created_at", false)? {
        Some(s) => DateTime::parse_from_rfc3339(&s)
            .map_err(|e| err(ParseErrorKind::Invalid(format!("created_at: {e}"))))?
            .with_timezone(&Utc),
        None => DateTime::<Utc>::UNIX_EPOCH,
    };
    let trail = match obj.remove("trail") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => parse_trail(v).map_err(|m| err(ParseErrorKind::Invalid(m)))?,
    };

    let lang = |code: &str| {
        registry
            .tag(code)
            .map_err(|_| err(ParseErrorKind::UnknownLanguage(code.to_string())))
    };
    let source_lang = lang(&src_lang)?;
    let target_lang = lang(&tgt_lang)?;

    let mut entry = CorpusEntry::new(src, source_lang, tgt, target_lang, provider, created_at)
        .map_err(|e| err(ParseErrorKind::Invalid(e.to_string())))?;
    if let Some(id) = id {
        if id != entry.id {
            return Err(err(ParseErrorKind::Invalid(format!(
                "id `{id}` does not match content hash `{}`",
                entry.id
            ))));
        }
    }
    entry
        .set_trail(trail)
        .map_err(|e| err(ParseErrorKind::Invalid(e.to_string())))?;
    entry.extra = obj;
    Ok(entry)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireVerdict {
    filter: FilterName,
    passed: bool,
    #[serde(default)]
    measured: Option<f64>,
    #[serde(default)]
    detail: String,
}

fn parse_trail(value: Value) -> Result<Vec<FilterVerdict>, String> {
    let wire: Vec<WireVerdict> =
        serde_json::from_value(value).map_err(|e| format!("trail: {e}"))?;
    Ok(wire
        .into_iter()
        .map(|w| FilterVerdict {
            filter: w.filter,
            passed: w.passed,
            measured: w.measured,
            detail: w.detail,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Stop at the first bad line.
    Strict,
    /// Report bad lines and keep going.
    #[default]
    Lenient,
}

/// Streaming reader over a JSON Lines corpus.
///
/// Yields entries in file order. Blank lines are skipped. In strict mode the
/// iterator ends after yielding the first error.
pub struct CorpusReader<'a, R> {
    reader: R,
    registry: &'a LanguageRegistry,
    mode: ParseMode,
    line_no: usize,
    done: bool,
    buf: Vec<u8>,
}

impl<'a, R: BufRead> CorpusReader<'a, R> {
    pub fn new(reader: R, registry: &'a LanguageRegistry, mode: ParseMode) -> Self {
        Self {
            reader,
            registry,
            mode,
            line_no: 0,
            done: false,
            buf: Vec::new(),
        }
    }
}

impl<R: BufRead> Iterator for CorpusReader<'_, R> {
    type Item = Result<CorpusEntry, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            self.buf.clear();
            self.line_no += 1;
            let line_no = self.line_no;
            let result = match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => match std::str::from_utf8(&self.buf) {
                    Ok(text) if text.trim().is_empty() => continue,
                    Ok(text) => parse_line(text.trim_end_matches(['\n', '\r']), line_no, self.registry),
                    Err(e) => Err(ParseError {
                        line: line_no,
                        kind: ParseErrorKind::Invalid(format!("invalid UTF-8: {e}")),
                    }),
                },
                Err(e) => {
                    self.done = true;
                    Err(ParseError {
                        line: line_no,
                        kind: ParseErrorKind::Io(e.to_string()),
                    })
                }
            };
            if result.is_err() && self.mode == ParseMode::Strict {
                self.done = true;
            }
            return Some(result);
        }
    }
}

/// Fully parsed corpus plus any lines rejected in lenient mode.
#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub entries: Vec<CorpusEntry>,
    pub errors: Vec<ParseError>,
}

pub fn parse_corpus<R: BufRead>(
    reader: R,
    registry: &LanguageRegistry,
    mode: ParseMode,
) -> Result<ParsedCorpus, ParseError> {
    let mut parsed = ParsedCorpus::default();
    for item in CorpusReader::new(reader, registry, mode) {
        match item {
            Ok(entry) => parsed.entries.push(entry),
            Err(e) if mode == ParseMode::Strict => return Err(e),
            Err(e) => parsed.errors.push(e),
        }
    }
    Ok(parsed)
}

pub fn write_corpus<'a, W: Write>(
    mut out: W,
    entries: impl IntoIterator<Item = &'a CorpusEntry>,
) -> std::io::Result<usize> {
    let mut n = 0;
    for entry in entries {
        out.write_all(entry.to_line().as_bytes())?;
        out.write_all(b"\n")?;
        n += 1;
    }
    Ok(n)
}

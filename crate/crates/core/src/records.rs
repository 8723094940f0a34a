//! Candidate sets, preference pairs and source lists, with their JSONL forms.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, ParseErrorKind};
use crate::lang::{Direction, LanguageRegistry, LanguageTag};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    pub provider: String,
    pub score: Option<f64>,
}

/// One source text plus the candidate translations proposed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub source_text: String,
    pub source_lang: LanguageTag,
    pub target_lang: LanguageTag,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn direction(&self) -> Result<Direction, Error> {
        Direction::new(self.source_lang.clone(), self.target_lang.clone())
    }

    /// Checks `1 <= len <= max_candidates` and that scores are finite.
    pub fn validate(&self, max_candidates: usize) -> Result<(), Error> {
        if self.candidates.is_empty() {
            return Err(Error::Invalid("candidate set is empty".into()));
        }
        if self.candidates.len() > max_candidates {
            return Err(Error::Invalid(format!(
                "candidate set has {} candidates, limit is {max_candidates}",
                self.candidates.len()
            )));
        }
        if self
            .candidates
            .iter()
            .any(|c| c.score.is_some_and(|s| !s.is_finite()))
        {
            return Err(Error::NonFinite("candidate score"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    JudgeProvider,
    HumanFile,
    RuleMock,
}

/// A (source, chosen, rejected) training unit for the reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub source_text: String,
    pub source_lang: LanguageTag,
    pub target_lang: LanguageTag,
    chosen: String,
    rejected: String,
    pub label_source: LabelSource,
}

impl PreferencePair {
    pub fn new(
        source_text: impl Into<String>,
        source_lang: LanguageTag,
        target_lang: LanguageTag,
        chosen: impl Into<String>,
        rejected: impl Into<String>,
        label_source: LabelSource,
    ) -> Result<Self, Error> {
        let (chosen, rejected) = (chosen.into(), rejected.into());
        if chosen.trim().is_empty() || rejected.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        if chosen == rejected {
            return Err(Error::Invalid("chosen and rejected translations are identical".into()));
        }
        Ok(Self {
            source_text: source_text.into(),
            source_lang,
            target_lang,
            chosen,
            rejected,
            label_source,
        })
    }

    pub fn chosen(&self) -> &str {
        &self.chosen
    }

    pub fn rejected(&self) -> &str {
        &self.rejected
    }
}

/// A source text with the languages it should be translated into.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceText {
    pub text: String,
    pub lang: LanguageTag,
    pub targets: Vec<LanguageTag>,
}

// ---- wire forms -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireCandidate {
    pub text: String,
    #[serde(default)]
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireCandidateSet {
    pub src_text: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePreferencePair {
    pub src_text: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub chosen: String,
    pub rejected: String,
    pub label_source: LabelSource,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSource {
    pub text: String,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
}

impl CandidateSet {
    pub fn to_wire(&self) -> WireCandidateSet {
        WireCandidateSet {
            src_text: self.source_text.clone(),
            src_lang: self.source_lang.code().into(),
            tgt_lang: self.target_lang.code().into(),
            candidates: self
                .candidates
                .iter()
                .map(|c| WireCandidate {
                    text: c.text.clone(),
                    provider: c.provider.clone(),
                    score: c.score,
                })
                .collect(),
        }
    }

    pub fn from_wire(w: WireCandidateSet, registry: &LanguageRegistry) -> Result<Self, Error> {
        let set = CandidateSet {
            source_lang: registry.tag(&w.src_lang)?,
            target_lang: registry.tag(&w.tgt_lang)?,
            source_text: w.src_text,
            candidates: w
                .candidates
                .into_iter()
                .map(|c| Candidate {
                    text: c.text,
                    provider: c.provider,
                    score: c.score,
                })
                .collect(),
        };
        set.direction()?;
        if set.source_text.trim().is_empty() || set.candidates.iter().any(|c| c.text.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        set.validate(usize::MAX)?;
        Ok(set)
    }
}

impl PreferencePair {
    pub fn to_wire(&self) -> WirePreferencePair {
        WirePreferencePair {
            src_text: self.source_text.clone(),
            src_lang: self.source_lang.code().into(),
            tgt_lang: self.target_lang.code().into(),
            chosen: self.chosen.clone(),
            rejected: self.rejected.clone(),
            label_source: self.label_source,
        }
    }

    pub fn from_wire(w: WirePreferencePair, registry: &LanguageRegistry) -> Result<Self, Error> {
        let src = registry.tag(&w.src_lang)?;
        let tgt = registry.tag(&w.tgt_lang)?;
        Direction::new(src.clone(), tgt.clone())?;
        PreferencePair::new(w.src_text, src, tgt, w.chosen, w.rejected, w.label_source)
    }
}

impl SourceText {
    pub fn to_wire(&self) -> WireSource {
        WireSource {
            text: self.text.clone(),
            lang: self.lang.code().into(),
            targets: self.targets.iter().map(|t| t.code().to_string()).collect(),
        }
    }

    pub fn from_wire(w: WireSource, registry: &LanguageRegistry) -> Result<Self, Error> {
        if w.text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let lang = registry.tag(&w.lang)?;
        let targets = w
            .targets
            .iter()
            .map(|t| {
                let tag = registry.tag(t)?;
                Direction::new(lang.clone(), tag.clone())?;
                Ok(tag)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(SourceText {
            text: w.text,
            lang,
            targets,
        })
    }
}

/// Reads a JSONL file of wire records, converting each with `convert`.
/// Strict: the first bad line aborts with its line number.
pub fn read_records<R, W, T>(
    reader: R,
    mut convert: impl FnMut(W) -> Result<T, Error>,
) -> Result<Vec<T>, ParseError>
where
    R: BufRead,
    W: DeserializeOwned,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ParseError {
            line: line_no,
            kind: ParseErrorKind::Io(e.to_string()),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: W = serde_json::from_str(&line).map_err(|e| ParseError {
            line: line_no,
            kind: if e.is_data() {
                ParseErrorKind::Invalid(e.to_string())
            } else {
                ParseErrorKind::MalformedJson(e.to_string())
            },
        })?;
        let item = convert(wire).map_err(|e| ParseError {
            line: line_no,
            kind: match e {
                Error::UnknownLanguage(code) => ParseErrorKind::UnknownLanguage(code),
                other => ParseErrorKind::Invalid(other.to_string()),
            },
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_candidate_sets<R: BufRead>(
    reader: R,
    registry: &LanguageRegistry,
) -> Result<Vec<CandidateSet>, ParseError> {
    read_records(reader, |w: WireCandidateSet| CandidateSet::from_wire(w, registry))
}

pub fn read_preference_pairs<R: BufRead>(
    reader: R,
    registry: &LanguageRegistry,
) -> Result<Vec<PreferencePair>, ParseError> {
    read_records(reader, |w: WirePreferencePair| PreferencePair::from_wire(w, registry))
}

pub fn read_sources<R: BufRead>(
    reader: R,
    registry: &LanguageRegistry,
) -> Result<Vec<SourceText>, ParseError> {
    read_records(reader, |w: WireSource| SourceText::from_wire(w, registry))
}

pub fn write_records<W: Write, T: Serialize>(
    mut out: W,
    records: impl IntoIterator<Item = T>,
) -> std::io::Result<usize> {
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_invariants() {
        let r = LanguageRegistry::builtin();
        let (en, es) = (r.tag("en").unwrap(), r.tag("es").unwrap());
        assert!(PreferencePair::new("s", en.clone(), es.clone(), "a", "a", LabelSource::RuleMock).is_err());
        assert!(PreferencePair::new("s", en.clone(), es.clone(), "", "a", LabelSource::RuleMock).is_err());
        assert!(PreferencePair::new("s", en, es, "a", "b", LabelSource::HumanFile).is_ok());
    }

    #[test]
    fn candidate_set_bounds() {
        let r = LanguageRegistry::builtin();
        let mut set = CandidateSet {
            source_text: "s".into(),
            source_lang: r.tag("en").unwrap(),
            target_lang: r.tag("es").unwrap(),
            candidates: vec![],
        };
        assert!(set.validate(4).is_err());
        set.candidates.push(Candidate { text: "a".into(), provider: "p".into(), score: Some(f64::NAN) });
        assert!(set.validate(4).is_err());
        set.candidates[0].score = Some(0.5);
        assert!(set.validate(4).is_ok());
        assert!(set.validate(0).is_err());
    }

    #[test]
    fn candidate_file_round_trip() {
        let r = LanguageRegistry::builtin();
        let line = r#"{"src_text":"Hi","src_lang":"en","tgt_lang":"es","candidates":[{"text":"Hola","provider":"m"},{"text":"Buenas","provider":"m","score":0.5}]}"#;
        let sets = read_candidate_sets(line.as_bytes(), &r).unwrap();
        assert_eq!(sets.len(), 1);
        let mut buf = Vec::new();
        write_records(&mut buf, sets.iter().map(CandidateSet::to_wire)).unwrap();
        let again = read_candidate_sets(&buf[..], &r).unwrap();
        assert_eq!(sets, again);
    }

    #[test]
    fn bad_record_reports_line() {
        let r = LanguageRegistry::builtin();
        let text = "{\"text\":\"a\",\"lang\":\"en\"}\n{\"text\":\"a\",\"lang\":\"qq\"}\n";
        let err = read_sources(text.as_bytes(), &r).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.kind, ParseErrorKind::UnknownLanguage("qq".into()));
    }
}

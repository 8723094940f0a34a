use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::lang::{LanguageRegistry, LanguageTag};
use crate::util::{canonical_hash, read_to_string};

const BUILTIN_RUBRIC: &str = include_str!("../../data/rubric.toml");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    #[serde(default)]
    pub polite: Vec<String>,
    #[serde(default)]
    pub impolite: Vec<String>,
}

/// Prefer one rendering over another for a direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteRule {
    /// Source language; any when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    pub tgt: String,
    /// The rule applies when the source contains any of these (always when empty).
    #[serde(default)]
    pub source_contains: Vec<String>,
    #[serde(default)]
    pub preferred: Vec<String>,
    #[serde(default)]
    pub dispreferred: Vec<String>,
}

impl RewriteRule {
    fn applies(&self, source_lower: &str, src: &LanguageTag, tgt: &LanguageTag) -> bool {
        self.tgt == tgt.code()
            && self.src.as_deref().is_none_or(|s| s == src.code())
            && (self.source_contains.is_empty()
                || self.source_contains.iter().any(|p| source_lower.contains(p.as_str())))
    }
}

/// Preference rubric: politeness lexicons per target language and
/// direction-specific rewrite rules. All forms are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    #[serde(default)]
    pub politeness: BTreeMap<String, Lexicon>,
    #[serde(default)]
    pub rewrite: Vec<RewriteRule>,
}

/// Lexicon and rule hits of one target text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RubricHits {
    pub polite: u32,
    pub impolite: u32,
    pub preferred: u32,
    pub dispreferred: u32,
}

impl RubricHits {
    pub fn net_preference(&self) -> i64 {
        i64::from(self.polite) + i64::from(self.preferred)
            - i64::from(self.impolite)
            - i64::from(self.dispreferred)
    }

    /// At least one wanted form and no unwanted one.
    pub fn compliant(&self) -> bool {
        self.polite + self.preferred >= 1 && self.impolite + self.dispreferred == 0
    }
}

fn count(haystack: &str, needles: &[String]) -> u32 {
    needles
        .iter()
        .filter(|n| !n.is_empty())
        .map(|n| haystack.matches(n.as_str()).count() as u32)
        .sum()
}

fn lowercase_all(v: &mut [String]) {
    for s in v {
        *s = s.to_lowercase();
    }
}

impl Rubric {
    pub fn builtin(registry: &LanguageRegistry) -> Self {
        Self::from_toml(BUILTIN_RUBRIC, registry).expect("builtin rubric is valid")
    }

    pub fn from_toml(text: &str, registry: &LanguageRegistry) -> Result<Self, Error> {
        let mut rubric: Rubric =
            toml::from_str(text).map_err(|e| Error::Config(format!("rubric: {e}")))?;
        rubric.normalize();
        rubric.validate(registry)?;
        Ok(rubric)
    }

    pub fn load(path: &Path, registry: &LanguageRegistry) -> Result<Self, Error> {
        Self::from_toml(&read_to_string(path)?, registry)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn normalize(&mut self) {
        for lex in self.politeness.values_mut() {
            lowercase_all(&mut lex.polite);
            lowercase_all(&mut lex.impolite);
        }
        for rule in &mut self.rewrite {
            lowercase_all(&mut rule.source_contains);
            lowercase_all(&mut rule.preferred);
            lowercase_all(&mut rule.dispreferred);
        }
    }

    pub fn validate(&self, registry: &LanguageRegistry) -> Result<(), Error> {
        for lang in self.politeness.keys() {
            registry.tag(lang)?;
        }
        for rule in &self.rewrite {
            registry.tag(&rule.tgt)?;
            if let Some(src) = &rule.src {
                registry.tag(src)?;
            }
            if rule.preferred.is_empty() && rule.dispreferred.is_empty() {
                return Err(Error::Config(format!(
                    "rewrite rule for `{}` has neither preferred nor dispreferred forms",
                    rule.tgt
                )));
            }
        }
        Ok(())
    }

    /// Stable hash over the canonical form; stored with trained params.
    pub fn hash(&self) -> String {
        canonical_hash(self)
    }

    pub fn covers(&self, lang: &LanguageTag) -> bool {
        self.politeness.contains_key(lang.code())
    }

    pub fn require_coverage(&self, lang: &LanguageTag) -> Result<(), Error> {
        if self.covers(lang) {
            Ok(())
        } else {
            Err(Error::UncoveredLanguage {
                rubric: self.hash()[..12].to_string(),
                lang: lang.code().to_string(),
            })
        }
    }

    pub fn hits(
        &self,
        source_text: &str,
        src: &LanguageTag,
        tgt: &LanguageTag,
        target_text: &str,
    ) -> RubricHits {
        let target = target_text.to_lowercase();
        let source = source_text.to_lowercase();
        let mut hits = RubricHits::default();
        if let Some(lex) = self.politeness.get(tgt.code()) {
            hits.polite = count(&target, &lex.polite);
            hits.impolite = count(&target, &lex.impolite);
        }
        for rule in self.rewrite.iter().filter(|r| r.applies(&source, src, tgt)) {
            hits.preferred += count(&target, &rule.preferred);
            hits.dispreferred += count(&target, &rule.dispreferred);
        }
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rubric_counts_forms() {
        let r = LanguageRegistry::builtin();
        let rubric = Rubric::builtin(&r);
        let (en, es) = (r.english(), r.tag("es").unwrap());
        let polite = rubric.hits("Can you send order 5 today?", &en, &es, "¿Podría enviar el pedido 5 hoy, por favor?");
        assert!(polite.preferred >= 1);
        assert!(polite.compliant());
        let plain = rubric.hits("Can you send order 5 today?", &en, &es, "¿Puede enviar el pedido 5 hoy?");
        assert_eq!(plain.dispreferred, 1);
        assert!(!plain.compliant());
        let casual = rubric.hits("x", &en, &es, "Oye, ¿me das tu dirección?");
        assert_eq!(casual.impolite, 1);
        assert!(casual.net_preference() < polite.net_preference());
    }

    #[test]
    fn rules_are_direction_scoped() {
        let r = LanguageRegistry::builtin();
        let rubric = Rubric::builtin(&r);
        let (fr, es) = (r.tag("fr").unwrap(), r.tag("es").unwrap());
        let h = rubric.hits("can you", &fr, &es, "¿Puede?");
        assert_eq!(h.dispreferred, 0);
    }

    #[test]
    fn validation_and_hash() {
        let r = LanguageRegistry::builtin();
        assert!(Rubric::from_toml("[politeness.xx]\npolite=[\"a\"]", &r).is_err());
        assert!(Rubric::from_toml("[[rewrite]]\ntgt=\"es\"", &r).is_err());
        assert!(Rubric::from_toml("bogus = 1", &r).is_err());
        let a = Rubric::from_toml("[politeness.es]\npolite=[\"Por Favor\"]", &r).unwrap();
        let b = Rubric::from_toml("[politeness.es]\npolite=[\"por favor\"]", &r).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Rubric::builtin(&r).hash());
        assert!(a.require_coverage(&r.tag("fr").unwrap()).is_err());
    }
}

//! Language tags and the cluster registry.
//!
//! Every language the pipeline handles is registered together with a
//! cluster id. Clusters group languages whose sentence lengths (in Unicode
//! scalar values) are comparable, which drives the length-ratio threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type ClusterId = u16;

/// A registered language code with its cluster.
///
/// Only constructible through [`LanguageRegistry::tag`], so a tag in hand
/// is always registered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageTag {
    code: Arc<str>,
    cluster: ClusterId,
}

impl LanguageTag {
    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn cluster(&self) -> ClusterId {
        self.cluster
    }

    pub fn is_english(&self) -> bool {
        &*self.code == "en"
    }

    pub fn same_cluster(&self, other: &LanguageTag) -> bool {
        self.cluster == other.cluster
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

#[derive(Debug, Clone)]
struct LanguageInfo {
    cluster: ClusterId,
    name: String,
}

/// Operator-curated cluster table, as read from a TOML file.
///
/// ```toml
/// [clusters]
/// alphabetic = ["en", "es", "fr"]
/// dense = ["zh", "ja", "ko"]
///
/// [names]
/// en = "English"
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClusterTable {
    pub clusters: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub names: BTreeMap<String, String>,
}

/// Registry of supported languages. "en" is always present.
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    langs: BTreeMap<String, LanguageInfo>,
    cluster_names: Vec<String>,
}

const BUILTIN_ALPHABETIC: &[(&str, &str)] = &[
    ("en", "English"),
    ("es", "Spanish"),
    ("fr", "French"),
    ("de", "German"),
    ("it", "Italian"),
    ("pt", "Portuguese"),
    ("nl", "Dutch"),
    ("pl", "Polish"),
    ("ro", "Romanian"),
    ("cs", "Czech"),
    ("hu", "Hungarian"),
    ("fi", "Finnish"),
    ("el", "Greek"),
    ("uk", "Ukrainian"),
    ("ru", "Russian"),
    ("tr", "Turkish"),
    ("az", "Azerbaijani"),
    ("id", "Indonesian"),
    ("ms", "Malay"),
    ("vi", "Vietnamese"),
    ("fa", "Persian"),
    ("ar", "Arabic"),
    ("he", "Hebrew"),
    ("hi", "Hindi"),
    ("bn", "Bengali"),
    ("ne", "Nepali"),
    ("th", "Thai"),
    ("my", "Burmese"),
];

const BUILTIN_DENSE: &[(&str, &str)] = &[("zh", "Chinese"), ("ja", "Japanese"), ("ko", "Korean")];

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl LanguageRegistry {
    /// The shipped table: alphabetic scripts in one cluster, CJK in another.
    pub fn builtin() -> Self {
        let mut table = ClusterTable::default();
        for (cluster, langs) in [("alphabetic", BUILTIN_ALPHABETIC), ("dense", BUILTIN_DENSE)] {
            table.clusters.insert(
                cluster.to_string(),
                langs.iter().map(|(c, _)| c.to_string()).collect(),
            );
            for (code, name) in langs {
                table.names.insert(code.to_string(), name.to_string());
            }
        }
        Self::from_table(&table).expect("builtin cluster table is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let table: ClusterTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("cluster table: {e}")))?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &ClusterTable) -> Result<Self, Error> {
        let builtin_names: BTreeMap<&str, &str> = BUILTIN_ALPHABETIC
            .iter()
            .chain(BUILTIN_DENSE)
            .copied()
            .collect();
        let mut langs = BTreeMap::new();
        let mut cluster_names = Vec::new();
        for (idx, (cluster, codes)) in table.clusters.iter().enumerate() {
            let id = ClusterId::try_from(idx)
                .map_err(|_| Error::Config("too many language clusters".into()))?;
            cluster_names.push(cluster.clone());
            for code in codes {
                validate_code(code)?;
                let name = table
                    .names
                    .get(code)
                    .cloned()
                    .or_else(|| builtin_names.get(code.as_str()).map(|s| s.to_string()))
                    .unwrap_or_else(|| code.clone());
                if langs
                    .insert(code.clone(), LanguageInfo { cluster: id, name })
                    .is_some()
                {
                    return Err(Error::Config(format!(
                        "language `{code}` assigned to more than one cluster"
                    )));
                }
            }
        }
        if !langs.contains_key("en") {
            return Err(Error::Config("cluster table must register `en`".into()));
        }
        Ok(Self {
            langs,
            cluster_names,
        })
    }

    pub fn tag(&self, code: &str) -> Result<LanguageTag, Error> {
        self.langs
            .get(code)
            .map(|info| LanguageTag {
                code: Arc::from(code),
                cluster: info.cluster,
            })
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }

    pub fn english(&self) -> LanguageTag {
        self.tag("en").expect("en is always registered")
    }

    pub fn contains(&self, code: &str) -> bool {
        self.langs.contains_key(code)
    }

    /// English display name, used to instantiate the "to {language}" danger word.
    pub fn english_name<'a>(&'a self, tag: &'a LanguageTag) -> &'a str {
        self.langs
            .get(tag.code())
            .map(|i| i.name.as_str())
            .unwrap_or(tag.code())
    }

    pub fn cluster_name(&self, tag: &LanguageTag) -> &str {
        &self.cluster_names[tag.cluster() as usize]
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.langs.keys().map(String::as_str)
    }

    pub fn tags(&self) -> Vec<LanguageTag> {
        self.codes().map(|c| self.tag(c).unwrap()).collect()
    }

    pub fn len(&self) -> usize {
        self.langs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.langs.is_empty()
    }
}

fn validate_code(code: &str) -> Result<(), Error> {
    let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("malformed language code `{code}`")))
    }
}

/// A translation direction, rendered `src-tgt` in file names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub src: LanguageTag,
    pub tgt: LanguageTag,
}

impl Direction {
    pub fn new(src: LanguageTag, tgt: LanguageTag) -> Result<Self, Error> {
        if src == tgt {
            return Err(Error::SameLanguage(src.code().to_string()));
        }
        Ok(Self { src, tgt })
    }

    /// Parses `en-es` style direction strings.
    pub fn parse(s: &str, registry: &LanguageRegistry) -> Result<Self, Error> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("direction `{s}` is not of the form src-tgt")))?;
        Self::new(registry.tag(a)?, registry.tag(b)?)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_all_supported_languages() {
        let reg = LanguageRegistry::builtin();
        assert!(reg.len() >= 28);
        for code in ["az", "bn", "cs", "el", "fa", "fi", "hi", "hu", "id", "ko", "ms", "my"] {
            assert!(reg.contains(code), "{code}");
        }
        for code in ["ne", "nl", "pt", "ro", "th", "uk", "fr", "ja", "pl", "vi", "en", "es", "zh"] {
            assert!(reg.contains(code), "{code}");
        }
    }

    #[test]
    fn clusters_match_examples() {
        let reg = LanguageRegistry::builtin();
        let en = reg.tag("en").unwrap();
        assert!(en.same_cluster(&reg.tag("es").unwrap()));
        assert!(!en.same_cluster(&reg.tag("zh").unwrap()));
    }

    #[test]
    fn lookup_rejects_unregistered() {
        let reg = LanguageRegistry::builtin();
        assert!(matches!(reg.tag("xx"), Err(Error::UnknownLanguage(_))));
        assert!(reg.tag("EN").is_err());
        assert!(reg.tag("").is_err());
    }

    #[test]
    fn table_requires_english_and_unique_membership() {
        let missing_en = "[clusters]\na = [\"es\"]\n";
        assert!(LanguageRegistry::from_toml(missing_en).is_err());
        let dup = "[clusters]\na = [\"en\", \"es\"]\nb = [\"es\"]\n";
        assert!(LanguageRegistry::from_toml(dup).is_err());
        let ok = "[clusters]\na = [\"en\", \"es\"]\nb = [\"zh\"]\n[names]\nzh = \"Mandarin\"\n";
        let reg = LanguageRegistry::from_toml(ok).unwrap();
        assert_eq!(reg.english_name(&reg.tag("zh").unwrap()), "Mandarin");
        assert_eq!(reg.english_name(&reg.tag("es").unwrap()), "Spanish");
    }

    #[test]
    fn direction_parsing() {
        let reg = LanguageRegistry::builtin();
        let d = Direction::parse("en-es", &reg).unwrap();
        assert_eq!(d.to_string(), "en-es");
        assert!(Direction::parse("en-en", &reg).is_err());
        assert!(Direction::parse("enes", &reg).is_err());
    }
}

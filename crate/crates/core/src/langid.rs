//! Character n-gram language identification.
//!
//! Profiles hold counts of lowercased character 1-, 2- and 3-grams taken
//! per whitespace-separated token, each token padded with one space on
//! both sides. Probabilities use additive smoothing (0.5) with a single
//! bucket for all unseen n-grams, so every order sums to one. A text
//! scores the mean log-probability of its n-grams, summed over orders.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{FilterName, FilterVerdict};
use crate::error::Error;
use crate::filters::Quarantine;
use crate::lang::{LanguageRegistry, LanguageTag};
use crate::providers::mock::PhraseBook;

pub const MAX_ORDER: usize = 3;
pub const SMOOTHING: f64 = 0.5;
pub const MIN_SAMPLE_CHARS: usize = 200;
pub const PROFILE_FORMAT_VERSION: u32 = 1;

const BUILTIN_SAMPLES: &[(&str, &str)] = &[
    ("de", include_str!("../data/langid/de.txt")),
    ("el", include_str!("../data/langid/el.txt")),
    ("en", include_str!("../data/langid/en.txt")),
    ("es", include_str!("../data/langid/es.txt")),
    ("fr", include_str!("../data/langid/fr.txt")),
    ("it", include_str!("../data/langid/it.txt")),
    ("ja", include_str!("../data/langid/ja.txt")),
    ("pt", include_str!("../data/langid/pt.txt")),
    ("ru", include_str!("../data/langid/ru.txt")),
    ("zh", include_str!("../data/langid/zh.txt")),
];

/// Calls `f` on every n-gram (orders 1..=MAX_ORDER) of `text`.
fn for_each_ngram(text: &str, mut f: impl FnMut(usize, &str)) {
    let mut buf = String::new();
    for token in text.split_whitespace() {
        let chars: Vec<char> = std::iter::once(' ')
            .chain(token.chars().flat_map(char::to_lowercase))
            .chain(std::iter::once(' '))
            .collect();
        for n in 1..=MAX_ORDER {
            for w in chars.windows(n) {
                if n == 1 && w[0] == ' ' {
                    continue;
                }
                buf.clear();
                buf.extend(w);
                f(n, &buf);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OrderCounts {
    n: usize,
    total: u64,
    counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileWire {
    lang: String,
    orders: Vec<OrderCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileFile {
    version: u32,
    profiles: Vec<ProfileWire>,
}

/// Smoothed log-frequency table for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct LangProfile {
    lang: LanguageTag,
    counts: Vec<OrderCounts>,
    logfreq: Vec<HashMap<String, f64>>,
    unseen: Vec<f64>,
}

impl LangProfile {
    fn from_counts(lang: LanguageTag, counts: Vec<OrderCounts>) -> Result<Self, Error> {
        if counts.len() != MAX_ORDER || counts.iter().enumerate().any(|(i, c)| c.n != i + 1) {
            return Err(Error::Invalid(format!(
                "profile `{lang}` must carry orders 1..={MAX_ORDER}"
            )));
        }
        let mut logfreq = Vec::with_capacity(MAX_ORDER);
        let mut unseen = Vec::with_capacity(MAX_ORDER);
        for order in &counts {
            let sum: u64 = order.counts.values().sum();
            if sum != order.total || order.total == 0 {
                return Err(Error::Invalid(format!(
                    "profile `{lang}` order {}: total {} does not match counts",
                    order.n, order.total
                )));
            }
            // mass: total + SMOOTHING per seen n-gram + SMOOTHING for the unseen bucket
            let mass = order.total as f64 + SMOOTHING * (order.counts.len() as f64 + 1.0);
            logfreq.push(
                order
                    .counts
                    .iter()
                    .map(|(g, &c)| (g.clone(), ((c as f64 + SMOOTHING) / mass).ln()))
                    .collect(),
            );
            unseen.push((SMOOTHING / mass).ln());
        }
        Ok(Self {
            lang,
            counts,
            logfreq,
            unseen,
        })
    }

    pub fn lang(&self) -> &LanguageTag {
        &self.lang
    }

    /// Smoothed log-probability of an n-gram of order `n`.
    pub fn logprob(&self, n: usize, gram: &str) -> f64 {
        self.logfreq[n - 1]
            .get(gram)
            .copied()
            .unwrap_or(self.unseen[n - 1])
    }

    /// Normalization constant of order `n`.
    pub fn total_mass(&self, n: usize) -> f64 {
        let o = &self.counts[n - 1];
        o.total as f64 + SMOOTHING * (o.counts.len() as f64 + 1.0)
    }

    /// Probability mass of seen n-grams plus the unseen bucket (1 up to rounding).
    pub fn probability_sum(&self, n: usize) -> f64 {
        self.logfreq[n - 1].values().map(|l| l.exp()).sum::<f64>() + self.unseen[n - 1].exp()
    }

    /// Mean log-probability per n-gram, summed over orders.
    pub fn score(&self, text: &str) -> f64 {
        let mut sums = [0.0; MAX_ORDER];
        let mut counts = [0usize; MAX_ORDER];
        for_each_ngram(text, |n, g| {
            sums[n - 1] += self.logprob(n, g);
            counts[n - 1] += 1;
        });
        sums.iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(s, c)| s / c as f64)
            .sum()
    }
}

/// Trains one profile per language. Every language needs at least
/// [`MIN_SAMPLE_CHARS`] characters of sample text.
pub fn train_profiles(
    samples: &BTreeMap<LanguageTag, Vec<String>>,
) -> Result<Vec<LangProfile>, Error> {
    if samples.is_empty() {
        return Err(Error::Invalid("no language samples given".into()));
    }
    let mut out = Vec::with_capacity(samples.len());
    for (lang, texts) in samples {
        let chars: usize = texts.iter().map(|t| t.chars().filter(|c| !c.is_whitespace()).count()).sum();
        if chars < MIN_SAMPLE_CHARS {
            return Err(Error::InsufficientSample {
                lang: lang.code().to_string(),
                chars,
                needed: MIN_SAMPLE_CHARS,
            });
        }
        let mut counts: Vec<OrderCounts> = (1..=MAX_ORDER)
            .map(|n| OrderCounts {
                n,
                total: 0,
                counts: BTreeMap::new(),
            })
            .collect();
        for text in texts {
            for_each_ngram(text, |n, g| {
                let o = &mut counts[n - 1];
                o.total += 1;
                *o.counts.entry(g.to_string()).or_insert(0) += 1;
            });
        }
        out.push(LangProfile::from_counts(lang.clone(), counts)?);
    }
    Ok(out)
}

/// Anything that ranks languages for a text.
pub trait LanguageDetector: Send + Sync {
    fn name(&self) -> &str;

    /// Languages by descending score, ties broken by code.
    fn detect(&self, text: &str) -> Result<Vec<(LanguageTag, f64)>, Error>;

    fn top1(&self, text: &str) -> Result<LanguageTag, Error> {
        self.detect(text)?
            .into_iter()
            .next()
            .map(|(t, _)| t)
            .ok_or_else(|| Error::Invalid(format!("detector `{}` returned no languages", self.name())))
    }
}

/// A set of profiles acting as one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDetector {
    name: String,
    profiles: Vec<LangProfile>,
}

impl ProfileDetector {
    pub fn new(name: impl Into<String>, profiles: Vec<LangProfile>) -> Result<Self, Error> {
        if profiles.is_empty() {
            return Err(Error::Invalid("detector needs at least one profile".into()));
        }
        Ok(Self {
            name: name.into(),
            profiles,
        })
    }

    pub fn train(
        name: impl Into<String>,
        samples: &BTreeMap<LanguageTag, Vec<String>>,
    ) -> Result<Self, Error> {
        Self::new(name, train_profiles(samples)?)
    }

    pub fn profiles(&self) -> &[LangProfile] {
        &self.profiles
    }

    pub fn languages(&self) -> Vec<LanguageTag> {
        self.profiles.iter().map(|p| p.lang.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ProfileFile {
            version: PROFILE_FORMAT_VERSION,
            profiles: self
                .profiles
                .iter()
                .map(|p| ProfileWire {
                    lang: p.lang.code().to_string(),
                    orders: p.counts.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("profiles serialize")
    }

    pub fn from_json(
        name: impl Into<String>,
        text: &str,
        registry: &LanguageRegistry,
    ) -> Result<Self, Error> {
        let file: ProfileFile = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("profile file: {e}")))?;
        if file.version != PROFILE_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "profile file version {} is not supported (expected {PROFILE_FORMAT_VERSION})",
                file.version
            )));
        }
        let mut profiles = Vec::with_capacity(file.profiles.len());
        for p in file.profiles {
            let tag = registry.tag(&p.lang)?;
            if profiles.iter().any(|q: &LangProfile| q.lang == tag) {
                return Err(Error::Invalid(format!("duplicate profile for `{tag}`")));
            }
            profiles.push(LangProfile::from_counts(tag, p.orders)?);
        }
        Self::new(name, profiles)
    }
}

impl LanguageDetector for ProfileDetector {
    fn name(&self) -> &str {
        &self.name
    }

    fn detect(&self, text: &str) -> Result<Vec<(LanguageTag, f64)>, Error> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut ranked: Vec<(LanguageTag, f64)> = self
            .profiles
            .iter()
            .map(|p| (p.lang.clone(), p.score(text)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.code().cmp(b.0.code())));
        Ok(ranked)
    }
}

/// Splits each language's samples into two disjoint halves (alternating
/// texts), giving the training sets of two independent detectors.
pub fn split_halves(
    samples: &BTreeMap<LanguageTag, Vec<String>>,
) -> (BTreeMap<LanguageTag, Vec<String>>, BTreeMap<LanguageTag, Vec<String>>) {
    let (mut a, mut b) = (BTreeMap::new(), BTreeMap::new());
    for (lang, texts) in samples {
        let (ea, eb): (Vec<_>, Vec<_>) = texts.iter().enumerate().partition(|(i, _)| i % 2 == 0);
        a.insert(lang.clone(), ea.into_iter().map(|(_, t)| t.clone()).collect());
        b.insert(lang.clone(), eb.into_iter().map(|(_, t)| t.clone()).collect());
    }
    (a, b)
}

/// Shipped sample texts plus every phrase-book rendering, per language.
pub fn builtin_samples(registry: &LanguageRegistry) -> BTreeMap<LanguageTag, Vec<String>> {
    let mut out: BTreeMap<LanguageTag, Vec<String>> = BTreeMap::new();
    for (code, text) in BUILTIN_SAMPLES {
        let tag = registry.tag(code).expect("builtin sample languages are registered");
        out.entry(tag)
            .or_default()
            .extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
    }
    for (code, texts) in PhraseBook::builtin().language_samples() {
        if let Ok(tag) = registry.tag(&code) {
            out.entry(tag).or_default().extend(texts);
        }
    }
    out
}

/// The two shipped detectors, trained on disjoint halves of the builtin samples.
pub fn builtin_detectors(registry: &LanguageRegistry) -> Result<(Arc<ProfileDetector>, Arc<ProfileDetector>), Error> {
    let (a, b) = split_halves(&builtin_samples(registry));
    Ok((
        Arc::new(ProfileDetector::train("ngram-a", &a)?),
        Arc::new(ProfileDetector::train("ngram-b", &b)?),
    ))
}

/// Passes when either detector's top language is `expected`.
pub fn dual_check(
    text: &str,
    expected: &LanguageTag,
    a: &dyn LanguageDetector,
    b: &dyn LanguageDetector,
) -> Result<FilterVerdict, Quarantine> {
    let top = |d: &dyn LanguageDetector| {
        d.top1(text)
            .map_err(|e| Quarantine::new(FilterName::Language, format!("{}: {e}", d.name())))
    };
    let (ta, tb) = (top(a)?, top(b)?);
    let detail = format!("{}={ta} {}={tb}", a.name(), b.name());
    Ok(if &ta == expected || &tb == expected {
        FilterVerdict::pass(FilterName::Language).with_detail(detail)
    } else {
        FilterVerdict::fail(FilterName::Language, format!("expected {expected}: {detail}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> LanguageRegistry {
        LanguageRegistry::builtin()
    }

    fn samples(pairs: &[(&str, &str)]) -> BTreeMap<LanguageTag, Vec<String>> {
        let r = reg();
        pairs
            .iter()
            .map(|(c, t)| (r.tag(c).unwrap(), vec![t.to_string(), t.to_string()]))
            .collect()
    }

    const EN: &str = "the quick brown fox jumps over the lazy dog while the cat sleeps on the warm mat by the door and the bird sings in the tall green tree near the quiet little house where the old man reads his morning paper with a cup of tea";
    const RU: &str = "быстрая коричневая лиса прыгает через ленивую собаку пока кошка спит на тёплом коврике у двери а птица поёт на высоком зелёном дереве возле тихого домика где старик читает утреннюю газету с чашкой чая";

    #[test]
    fn disjoint_scripts_prefer_own_profile() {
        let profiles = train_profiles(&samples(&[("en", EN), ("ru", RU)])).unwrap();
        let (en, ru) = (&profiles[0], &profiles[1]);
        assert!(en.score(EN) > ru.score(EN));
        assert!(ru.score(RU) > en.score(RU));
    }

    #[test]
    fn training_is_deterministic() {
        let s = samples(&[("en", EN), ("ru", RU)]);
        let a = ProfileDetector::train("a", &s).unwrap().to_json();
        let b = ProfileDetector::train("a", &s).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn training_preconditions() {
        assert!(train_profiles(&BTreeMap::new()).is_err());
        assert!(matches!(
            train_profiles(&samples(&[("en", "too short")])),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn distributions_sum_to_one() {
        let profiles = train_profiles(&samples(&[("en", EN)])).unwrap();
        for n in 1..=MAX_ORDER {
            assert!((profiles[0].probability_sum(n) - 1.0).abs() < 1e-9);
            assert!(profiles[0].logprob(n, "qqq").is_finite());
        }
    }

    #[test]
    fn ties_fall_back_to_code_order() {
        let d = ProfileDetector::train("d", &samples(&[("es", EN), ("en", EN), ("de", EN)])).unwrap();
        let ranked = d.detect("x").unwrap();
        let codes: Vec<_> = ranked.iter().map(|(t, _)| t.code()).collect();
        assert_eq!(codes, vec!["de", "en", "es"]);
    }

    #[test]
    fn whitespace_text_is_rejected() {
        let d = ProfileDetector::train("d", &samples(&[("en", EN)])).unwrap();
        assert!(matches!(d.detect("   \t"), Err(Error::EmptyText)));
    }

    #[test]
    fn json_round_trip() {
        let r = reg();
        let d = ProfileDetector::train("d", &samples(&[("en", EN), ("ru", RU)])).unwrap();
        let back = ProfileDetector::from_json("d", &d.to_json(), &r).unwrap();
        assert_eq!(back, d);
        assert!(ProfileDetector::from_json("d", r#"{"version":2,"profiles":[]}"#, &r).is_err());
    }

    #[test]
    fn builtin_detectors_recognise_their_languages() {
        let r = reg();
        let (a, b) = builtin_detectors(&r).unwrap();
        for (code, text) in BUILTIN_SAMPLES {
            let line = text.lines().next().unwrap();
            let expected = r.tag(code).unwrap();
            let v = dual_check(line, &expected, a.as_ref(), b.as_ref()).unwrap();
            assert!(v.passed, "{code}: {line}: {:?} {:?}", v, a.detect(line).unwrap());
        }
    }

    #[test]
    fn each_detector_labels_the_other_half() {
        let r = reg();
        let (a, b) = builtin_detectors(&r).unwrap();
        let mut wrong = Vec::new();
        for (code, text) in BUILTIN_SAMPLES {
            for (i, line) in text.lines().enumerate() {
                let held_out = if i % 2 == 0 { &b } else { &a };
                let top = held_out.top1(line).unwrap();
                if top.code() != *code {
                    wrong.push(format!("{code}->{top}: {line}"));
                }
            }
        }
        assert!(wrong.is_empty(), "{wrong:#?}");
    }

    struct Fixed(&'static str, Option<&'static str>);

    impl LanguageDetector for Fixed {
        fn name(&self) -> &str {
            self.0
        }
        fn detect(&self, _: &str) -> Result<Vec<(LanguageTag, f64)>, Error> {
            match self.1 {
                Some(code) => Ok(vec![(reg().tag(code).unwrap(), 0.0)]),
                None => Err(Error::Invalid("offline".into())),
            }
        }
    }

    #[test]
    fn pass_any_rule() {
        let es = reg().tag("es").unwrap();
        let check = |a: &str, b: &str| {
            let (a, b) = (Fixed("a", Some(leak(a))), Fixed("b", Some(leak(b))));
            dual_check("hola", &es, &a, &b).unwrap().passed
        };
        assert!(check("es", "pt"));
        assert!(check("pt", "es"));
        assert!(!check("pt", "en"));
        assert!(check("es", "es"));
        let q = dual_check("hola", &es, &Fixed("a", Some("es")), &Fixed("b", None)).unwrap_err();
        assert_eq!(q.filter, FilterName::Language);
    }

    fn leak(s: &str) -> &'static str {
        Box::leak(s.to_string().into_boxed_str())
    }
}

//! TOML configuration: schema, loading, path resolution and provider wiring.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use prefcorpus::corpus::FilterName;
use prefcorpus::filters::{DangerWords, EmojiList, FilterConfig};
use prefcorpus::lang::{LanguageRegistry, LanguageTag};
use prefcorpus::langid::{builtin_detectors, ProfileDetector};
use prefcorpus::pipeline::{GenerationSettings, ModelRegistry};
use prefcorpus::providers::http::{HttpEmbedder, HttpJudge, HttpScorer, HttpTranslator};
use prefcorpus::providers::mock::{MockTranslator, RuleJudge};
use prefcorpus::providers::{Judge, ProviderConfig, ProviderKind, Scorer, Translator, DEFAULT_JUDGE_PROMPT};
use prefcorpus::reward::Rubric;
use prefcorpus::similarity::{Embedder, HashedNgramEmbedder, SimilarityMode, DEFAULT_DIM};
use prefcorpus::util::{canonical_hash, read_to_string};
use prefcorpus::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreSection {
    #[serde(default = "default_store_root")]
    pub root: PathBuf,
}

fn default_store_root() -> PathBuf {
    PathBuf::from("store")
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            root: default_store_root(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    pub alpha_same_cluster: Option<f64>,
    pub alpha_cross_cluster: Option<f64>,
    pub similarity_threshold: Option<f64>,
    pub similarity_mode: Option<SimilarityMode>,
    pub cascade_order: Option<Vec<FilterName>>,
    /// Word list file; the builtin list otherwise.
    pub danger_words: Option<PathBuf>,
    /// Emoji sequence file; the builtin list otherwise.
    pub emoji_list: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    /// `builtin`, or the name of an `embed` provider.
    #[serde(default = "default_embedder")]
    pub embedder: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_embedder() -> String {
    "builtin".into()
}
fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            embedder: default_embedder(),
            dim: default_dim(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangidSection {
    /// Two profile files from `langid train`; the builtin pair otherwise.
    pub profiles: Option<[PathBuf; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    /// Translate provider producing candidates.
    #[serde(default = "default_mock")]
    pub producer: String,
    /// Translate providers used by the cold start.
    #[serde(default = "default_cold_start")]
    pub cold_start: Vec<String>,
    /// Translate provider for back-translation and pivoting; the producer otherwise.
    pub pivot: Option<String>,
    /// `rule`, or the name of a `judge` provider.
    #[serde(default = "default_judge")]
    pub judge: String,
    /// Prompt template for an HTTP judge. Placeholders: `{source}`,
    /// `{src_lang}`, `{tgt_lang}`, `{a}`, `{b}`.
    pub judge_prompt: Option<String>,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_styles")]
    pub styles: Vec<String>,
    /// Targets for sources that name none.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default = "default_schedule_days")]
    pub schedule_days: u32,
    /// Directions with a dedicated model, for routed evaluation.
    #[serde(default)]
    pub models: Vec<String>,
}

fn default_mock() -> String {
    "mock".into()
}
fn default_cold_start() -> Vec<String> {
    vec![default_mock()]
}
fn default_judge() -> String {
    "rule".into()
}
fn default_candidates() -> usize {
    GenerationSettings::default().n
}
fn default_styles() -> Vec<String> {
    GenerationSettings::default().styles
}
fn default_schedule_days() -> u32 {
    30
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            producer: default_mock(),
            cold_start: default_cold_start(),
            pivot: None,
            judge_prompt: None,
            judge: default_judge(),
            candidates: default_candidates(),
            styles: default_styles(),
            targets: Vec::new(),
            schedule_days: default_schedule_days(),
            models: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_lr() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    200
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            epochs: default_epochs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Name of a `score` provider consulted as an extra metric.
    pub scorer: Option<String>,
}

/// The whole config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// Cluster table file; the builtin registry otherwise.
    pub languages: Option<PathBuf>,
    /// Rubric file; the builtin rubric otherwise.
    pub rubric: Option<PathBuf>,
    #[serde(default)]
    pub store: StoreSection,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub langid: LangidSection,
    #[serde(default = "default_providers")]
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_providers() -> Vec<ProviderConfig> {
    vec![ProviderConfig::new(
        default_mock(),
        ProviderKind::Translate,
        "mock://phrasebook".parse().expect("static url"),
    )]
}

impl Default for CliConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

/// A loaded config: paths resolved against the config file's directory.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: CliConfig,
    pub hash: String,
    pub registry: Arc<LanguageRegistry>,
    pub rubric: Arc<Rubric>,
}

impl Loaded {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let (mut config, base) = match path {
            Some(p) => {
                let text = read_to_string(p)?;
                let config: CliConfig =
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (config, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (CliConfig::default(), PathBuf::new()),
        };
        let hash = canonical_hash(&config);
        config.resolve(&base)?;
        let registry = Arc::new(match &config.languages {
            Some(p) => LanguageRegistry::from_toml(&read_to_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => LanguageRegistry::builtin(),
        });
        let rubric = Arc::new(match &config.rubric {
            Some(p) => Rubric::load(p, &registry)?,
            None => Rubric::builtin(&registry),
        });
        let loaded = Self {
            config,
            hash,
            registry,
            rubric,
        };
        loaded.validate()?;
        Ok(loaded)
    }

    fn validate(&self) -> Result<(), Error> {
        let c = &self.config;
        let mut names = BTreeSet::new();
        for p in &c.providers {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config(format!("provider `{}` is defined twice", p.name)));
            }
        }
        if c.pipeline.candidates == 0 {
            return Err(Error::Config("pipeline.candidates must be at least 1".into()));
        }
        if c.pipeline.schedule_days == 0 {
            return Err(Error::Config("pipeline.schedule_days must be at least 1".into()));
        }
        for t in &c.pipeline.targets {
            self.registry.tag(t)?;
        }
        self.models()?;
        self.filter_config()?;
        Ok(())
    }

    fn provider(&self, name: &str, kind: ProviderKind) -> Result<&ProviderConfig, Error> {
        let p = self
            .config
            .providers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("no provider named `{name}`")))?;
        if p.kind != kind {
            return Err(Error::Config(format!("provider `{name}` is a {} provider, expected {kind}", p.kind)));
        }
        Ok(p)
    }

    pub fn translator(&self, name: &str, seed: Option<u64>) -> Result<Arc<dyn Translator>, Error> {
        let p = self.provider(name, ProviderKind::Translate)?;
        if p.is_mock() {
            let mut url = p.endpoint.clone();
            let has_seed = url.query_pairs().any(|(k, _)| k == "seed");
            if let (Some(seed), false) = (seed, has_seed) {
                url.query_pairs_mut().append_pair("seed", &seed.to_string());
            }
            Ok(Arc::new(MockTranslator::from_url(&p.name, &url)?))
        } else {
            Ok(Arc::new(HttpTranslator::new(p.clone())?))
        }
    }

    pub fn producer(&self, seed: Option<u64>) -> Result<Arc<dyn Translator>, Error> {
        self.translator(&self.config.pipeline.producer, seed)
    }

    pub fn pivot(&self, seed: Option<u64>) -> Result<Arc<dyn Translator>, Error> {
        let name = self.config.pipeline.pivot.as_deref().unwrap_or(&self.config.pipeline.producer);
        if self.config.pipeline.pivot.is_none() && !self.provider(name, ProviderKind::Translate)?.is_mock() {
            tracing::warn!(provider = name, "no [pipeline] pivot set; the producer checks its own output");
        }
        self.translator(name, seed)
    }

    pub fn judge(&self) -> Result<Arc<dyn Judge>, Error> {
        let name = &self.config.pipeline.judge;
        if name == "rule" {
            return Ok(Arc::new(RuleJudge::new(self.rubric.clone(), self.registry.clone())));
        }
        let p = self.provider(name, ProviderKind::Judge)?;
        if p.is_mock() {
            Ok(Arc::new(RuleJudge::new(self.rubric.clone(), self.registry.clone())))
        } else {
            let prompt = self.config.pipeline.judge_prompt.as_deref().unwrap_or(DEFAULT_JUDGE_PROMPT);
            Ok(Arc::new(HttpJudge::new(p.clone(), prompt)?))
        }
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, Error> {
        let s = &self.config.similarity;
        if s.embedder == "builtin" {
            return Ok(Arc::new(HashedNgramEmbedder::new(s.dim)));
        }
        let p = self.provider(&s.embedder, ProviderKind::Embed)?;
        if p.is_mock() {
            Ok(Arc::new(HashedNgramEmbedder::new(s.dim)))
        } else {
            Ok(Arc::new(HttpEmbedder::new(p.clone(), s.dim)?))
        }
    }

    pub fn scorer(&self) -> Result<Option<Arc<dyn Scorer>>, Error> {
        match &self.config.eval.scorer {
            None => Ok(None),
            Some(name) => {
                let p = self.provider(name, ProviderKind::Score)?;
                if p.is_mock() {
                    return Err(Error::Config(format!("score provider `{name}` has no mock implementation")));
                }
                Ok(Some(Arc::new(HttpScorer::new(p.clone())?)))
            }
        }
    }

    pub fn detectors(&self) -> Result<(Arc<ProfileDetector>, Arc<ProfileDetector>), Error> {
        match &self.config.langid.profiles {
            None => builtin_detectors(&self.registry),
            Some([a, b]) => Ok((
                Arc::new(ProfileDetector::from_json("profile-a", &read_to_string(a)?, &self.registry)?),
                Arc::new(ProfileDetector::from_json("profile-b", &read_to_string(b)?, &self.registry)?),
            )),
        }
    }

    pub fn filter_config(&self) -> Result<FilterConfig, Error> {
        let f = &self.config.filters;
        let mut cfg = FilterConfig::default();
        if let Some(v) = f.alpha_same_cluster {
            cfg.alpha_same_cluster = v;
        }
        if let Some(v) = f.alpha_cross_cluster {
            cfg.alpha_cross_cluster = v;
        }
        if let Some(v) = f.similarity_threshold {
            cfg.similarity_threshold = v;
        }
        if let Some(v) = f.similarity_mode {
            cfg.similarity_mode = v;
        }
        if let Some(v) = &f.cascade_order {
            cfg.cascade_order = v.clone();
        }
        if let Some(p) = &f.danger_words {
            cfg.danger_words = DangerWords::load(p)?;
        }
        if let Some(p) = &f.emoji_list {
            cfg.emoji_list = EmojiList::load(p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn generation(&self) -> GenerationSettings {
        GenerationSettings {
            n: self.config.pipeline.candidates,
            styles: self.config.pipeline.styles.clone(),
        }
    }

    pub fn default_targets(&self) -> Result<Vec<LanguageTag>, Error> {
        self.config.pipeline.targets.iter().map(|t| self.registry.tag(t)).collect()
    }

    pub fn models(&self) -> Result<ModelRegistry, Error> {
        ModelRegistry::parse(&self.config.pipeline.models.join(","), &self.registry)
    }

    pub fn store_root(&self) -> &Path {
        &self.config.store.root
    }
}

impl CliConfig {
    /// Makes relative paths absolute against `base` and checks that input
    /// files exist. The store root may not exist yet.
    fn resolve(&mut self, base: &Path) -> Result<(), Error> {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.store.root);
        let mut inputs: Vec<&mut PathBuf> = Vec::new();
        inputs.extend(self.languages.as_mut());
        inputs.extend(self.rubric.as_mut());
        inputs.extend(self.filters.danger_words.as_mut());
        inputs.extend(self.filters.emoji_list.as_mut());
        if let Some(pair) = self.langid.profiles.as_mut() {
            inputs.extend(pair.iter_mut());
        }
        for p in inputs {
            join(p);
            if !p.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let loaded = Loaded::load(None).unwrap();
        assert_eq!(loaded.config.pipeline.producer, "mock");
        loaded.producer(None).unwrap();
        loaded.judge().unwrap();
        loaded.embedder().unwrap();
        assert!(loaded.scorer().unwrap().is_none());
        assert_eq!(loaded.hash.len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_missing_files_and_bad_providers() {
        let dir = tempfile::tempdir().unwrap();
        let write = |body: &str| {
            let p = dir.path().join("c.toml");
            std::fs::write(&p, body).unwrap();
            p
        };
        assert!(Loaded::load(Some(&write("bogus = 1"))).is_err());
        assert!(Loaded::load(Some(&write("rubric = \"missing.toml\""))).is_err());
        let p = write("[pipeline]\nproducer = \"nope\"");
        let loaded = Loaded::load(Some(&p)).unwrap();
        assert!(loaded.producer(None).is_err());
        assert!(Loaded::load(Some(&write("[pipeline]\ntargets = [\"xx\"]"))).is_err());
        assert!(Loaded::load(Some(&write("[filters]\nalpha_same_cluster = 0.5"))).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[reward]\nlr = 0.1").unwrap();
        let a = Loaded::load(Some(&p)).unwrap().hash;
        std::fs::write(&p, "[reward]\nlr = 0.2").unwrap();
        let b = Loaded::load(Some(&p)).unwrap().hash;
        std::fs::write(&p, "[reward]\nlr = 0.1\n# comment").unwrap();
        let c = Loaded::load(Some(&p)).unwrap().hash;
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}

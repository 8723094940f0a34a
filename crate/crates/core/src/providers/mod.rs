//! Contracts for external model resources and their clients.
//!
//! Four provider kinds exist: translators (candidate generators and pivot
//! translators), judges, embedders and scorers. Remote ones speak a small
//! JSON-over-HTTP protocol (see [`http`]); [`mock`] holds deterministic
//! stand-ins used by tests and desk-scale runs.

pub mod http;
pub mod mock;
pub mod retry;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;
use url::Url;

use crate::lang::LanguageTag;
use crate::records::LabelSource;

pub use retry::{with_retry, ConcurrencyLimit, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("{provider}: request timed out")]
    Timeout { provider: String },

    #[error("{provider}: HTTP status {status}")]
    Http { provider: String, status: u16 },

    #[error("{provider}: transport failure: {message}")]
    Transport { provider: String, message: String },

    #[error("{provider}: malformed response: {message}")]
    Malformed { provider: String, message: String },

    #[error("{provider}: environment variable `{var}` is not set")]
    MissingToken { provider: String, var: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{provider}: cannot serve request: {message}")]
    Unsupported { provider: String, message: String },

    #[error("{provider}: gave up after {attempts} attempts: {last}")]
    Exhausted {
        provider: String,
        attempts: u32,
        last: Box<ProviderError>,
    },
}

impl ProviderError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Timeout { .. } | ProviderError::Transport { .. } => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Translate,
    Judge,
    Embed,
    Score,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Translate => "translate",
            ProviderKind::Judge => "judge",
            ProviderKind::Embed => "embed",
            ProviderKind::Score => "score",
        })
    }
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}

/// Connection settings for one provider. Tokens are read from the
/// environment variable named by `auth_env`, never from the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    pub endpoint: Url,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

impl ProviderConfig {
    pub fn new(name: impl Into<String>, kind: ProviderKind, endpoint: Url) -> Self {
        Self {
            name: name.into(),
            kind,
            endpoint,
            auth_env: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            backoff_base_ms: default_backoff_ms(),
            max_concurrency: default_concurrency(),
        }
    }

    pub fn validate(&self) -> Result<(), crate::Error> {
        if self.name.trim().is_empty() {
            return Err(crate::Error::Config("provider name is empty".into()));
        }
        if self.max_concurrency < 1 {
            return Err(crate::Error::Config(format!(
                "provider `{}`: max_concurrency must be at least 1",
                self.name
            )));
        }
        if self.timeout_ms == 0 {
            return Err(crate::Error::Config(format!(
                "provider `{}`: timeout must be positive",
                self.name
            )));
        }
        if !matches!(self.endpoint.scheme(), "http" | "https" | "mock") {
            return Err(crate::Error::Config(format!(
                "provider `{}`: unsupported endpoint scheme `{}`",
                self.name,
                self.endpoint.scheme()
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::new(self.max_retries, Duration::from_millis(self.backoff_base_ms))
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint.scheme() == "mock"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslateRequest<'a> {
    pub text: &'a str,
    pub src: &'a LanguageTag,
    pub tgt: &'a LanguageTag,
    pub style: Option<&'a str>,
    pub n: usize,
}

pub trait Translator: Send + Sync {
    fn name(&self) -> &str;

    fn translate(&self, request: &TranslateRequest<'_>) -> Result<Vec<String>, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeRequest<'a> {
    pub source_text: &'a str,
    pub source_lang: &'a LanguageTag,
    pub target_lang: &'a LanguageTag,
    pub a: &'a str,
    pub b: &'a str,
    pub rubric_prompt: &'a str,
}

pub trait Judge: Send + Sync {
    fn name(&self) -> &str;

    fn label_source(&self) -> LabelSource {
        LabelSource::JudgeProvider
    }

    fn judge(&self, request: &JudgeRequest<'_>) -> Result<Winner, ProviderError>;
}

/// External quality scorer (a neural metric behind HTTP, for instance).
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, source: &str, hypothesis: &str, reference: &str) -> Result<f64, ProviderError>;
}

/// Validated translate call: rejects same-language requests and never
/// returns an empty list or empty-string candidates.
pub fn translate(
    provider: &dyn Translator,
    text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    style: Option<&str>,
) -> Result<Vec<String>, ProviderError> {
    translate_n(provider, text, src, tgt, style, 1)
}

pub fn translate_n(
    provider: &dyn Translator,
    text: &str,
    src: &LanguageTag,
    tgt: &LanguageTag,
    style: Option<&str>,
    n: usize,
) -> Result<Vec<String>, ProviderError> {
    if src == tgt {
        return Err(ProviderError::Precondition(format!(
            "source and target language are both `{src}`"
        )));
    }
    if text.trim().is_empty() {
        return Err(ProviderError::Precondition("empty source text".into()));
    }
    let request = TranslateRequest {
        text,
        src,
        tgt,
        style,
        n: n.max(1),
    };
    let candidates = provider.translate(&request)?;
    if candidates.is_empty() {
        return Err(ProviderError::Malformed {
            provider: provider.name().to_string(),
            message: "no candidates returned".into(),
        });
    }
    if candidates.iter().any(|c| c.trim().is_empty()) {
        return Err(ProviderError::Malformed {
            provider: provider.name().to_string(),
            message: "empty candidate returned".into(),
        });
    }
    debug!(
        provider = provider.name(),
        src = %src,
        tgt = %tgt,
        style = style.unwrap_or("-"),
        candidates = candidates.len(),
        "translate"
    );
    Ok(candidates)
}

/// Validated judge call: the two candidates must differ.
pub fn judge(provider: &dyn Judge, request: &JudgeRequest<'_>) -> Result<Winner, ProviderError> {
    if request.a == request.b {
        return Err(ProviderError::Precondition(
            "judge candidates are identical".into(),
        ));
    }
    let winner = provider.judge(request)?;
    debug!(provider = provider.name(), ?winner, "judge");
    Ok(winner)
}

/// Renders a judge prompt template. Placeholders: `{source}`, `{a}`, `{b}`,
/// `{src_lang}`, `{tgt_lang}`.
pub fn render_prompt(template: &str, request: &JudgeRequest<'_>) -> String {
    template
        .replace("{source}", request.source_text)
        .replace("{src_lang}", request.source_lang.code())
        .replace("{tgt_lang}", request.target_lang.code())
        .replace("{a}", request.a)
        .replace("{b}", request.b)
}

pub const DEFAULT_JUDGE_PROMPT: &str = "Source ({src_lang}): {source}\n\
Translation A ({tgt_lang}): {a}\n\
Translation B ({tgt_lang}): {b}\n\
Pick the translation that is correct in grammar and orthography, polite in tone for the \
target culture, and follows the customer's special-case wording. Answer `a` or `b`.";

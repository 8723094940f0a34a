//! JSON-over-HTTP provider clients.
//!
//! Every request is a `POST` of a JSON body to the configured endpoint:
//!
//! | kind      | request                                 | response                    |
//! |-----------|-----------------------------------------|-----------------------------|
//! | translate | `{"text","src","tgt","style","n"}`      | `{"candidates":[...]}`      |
//! | judge     | `{"src_text","a","b","rubric"}`         | `{"winner":"a"\|"b"}`       |
//! | embed     | `{"text"}`                              | `{"embedding":[...]}`       |
//! | score     | `{"src","hyp","ref"}`                   | `{"score":x}`               |
//!
//! When `auth_env` is configured the token is sent as `Authorization: Bearer`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    render_prompt, ConcurrencyLimit, Judge, JudgeRequest, ProviderConfig, ProviderError,
    ProviderKind, RetryPolicy, Scorer, TranslateRequest, Translator, Winner,
};
use crate::similarity::{EmbedError, Embedder, EmbeddingVector};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TranslateBody {
    pub text: String,
    pub src: String,
    pub tgt: String,
    pub style: Option<String>,
    pub n: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TranslateResponse {
    pub candidates: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JudgeBody {
    pub src_text: String,
    pub a: String,
    pub b: String,
    pub rubric: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JudgeResponse {
    pub winner: Winner,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EmbedBody {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreBody {
    pub src: String,
    pub hyp: String,
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreResponse {
    pub score: f64,
}

/// Decodes a response body for the given provider kind, as the clients do.
/// Exposed for fuzzing the response decoders.
pub fn decode_response(kind: ProviderKind, body: &[u8]) -> Result<(), String> {
    fn dec<T: DeserializeOwned>(body: &[u8]) -> Result<T, String> {
        serde_json::from_slice(body).map_err(|e| e.to_string())
    }
    match kind {
        ProviderKind::Translate => check_candidates(dec::<TranslateResponse>(body)?.candidates).map(drop),
        ProviderKind::Judge => dec::<JudgeResponse>(body).map(drop),
        ProviderKind::Embed => check_embedding(dec::<EmbedResponse>(body)?.embedding, None).map(drop),
        ProviderKind::Score => check_score(dec::<ScoreResponse>(body)?.score).map(drop),
    }
}

fn check_candidates(candidates: Vec<String>) -> Result<Vec<String>, String> {
    if candidates.is_empty() {
        return Err("no candidates".into());
    }
    if candidates.iter().any(|c| c.trim().is_empty()) {
        return Err("empty candidate".into());
    }
    Ok(candidates)
}

fn check_embedding(values: Vec<f64>, dim: Option<usize>) -> Result<Vec<f64>, String> {
    if values.is_empty() {
        return Err("empty embedding".into());
    }
    if let Some(d) = dim {
        if values.len() != d {
            return Err(format!("embedding has {} dimensions, expected {d}", values.len()));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err("non-finite embedding component".into());
    }
    Ok(values)
}

fn check_score(score: f64) -> Result<f64, String> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err("non-finite score".into())
    }
}

/// Shared transport: agent, retry policy and in-flight permit.
#[derive(Debug)]
pub struct HttpClient {
    config: ProviderConfig,
    agent: ureq::Agent,
    policy: RetryPolicy,
    limit: ConcurrencyLimit,
}

impl HttpClient {
    pub fn new(config: ProviderConfig) -> Result<Self, crate::Error> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout()).build();
        Ok(Self {
            policy: config.retry_policy(),
            limit: ConcurrencyLimit::new(config.max_concurrency),
            agent,
            config,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn limit(&self) -> &ConcurrencyLimit {
        &self.limit
    }

    fn name(&self) -> &str {
        &self.config.name
    }

    /// POSTs `body` with retries; decodes and validates the response.
    pub fn post<B, R, T>(
        &self,
        body: &B,
        validate: impl Fn(R) -> Result<T, String>,
    ) -> Result<T, ProviderError>
    where
        B: Serialize,
        R: DeserializeOwned,
    {
        let token = match &self.config.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingToken {
                provider: self.name().to_string(),
                var: var.clone(),
            })?),
            None => None,
        };
        with_retry_http(self, |_| {
            let mut req = self.agent.post(self.config.endpoint.as_str());
            if let Some(t) = &token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            let resp = req.send_json(body).map_err(|e| self.classify(e))?;
            let decoded: R = resp.into_json().map_err(|e| ProviderError::Malformed {
                provider: self.name().to_string(),
                message: e.to_string(),
            })?;
            validate(decoded).map_err(|message| ProviderError::Malformed {
                provider: self.name().to_string(),
                message,
            })
        })
    }

    fn classify(&self, err: ureq::Error) -> ProviderError {
        let provider = self.name().to_string();
        match err {
            ureq::Error::Status(status, _) => ProviderError::Http { provider, status },
            ureq::Error::Transport(t) => {
                let timed_out = std::error::Error::source(&t)
                    .and_then(|s| s.downcast_ref::<std::io::Error>())
                    .is_some_and(|io| {
                        matches!(
                            io.kind(),
                            std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
                        )
                    });
                if timed_out {
                    ProviderError::Timeout { provider }
                } else {
                    ProviderError::Transport {
                        provider,
                        message: t.to_string(),
                    }
                }
            }
        }
    }
}

fn with_retry_http<T>(
    client: &HttpClient,
    request: impl FnMut(u32) -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    super::with_retry(client.name(), &client.policy, &client.limit, request)
}

fn expect_kind(config: &ProviderConfig, kind: ProviderKind) -> Result<(), crate::Error> {
    if config.kind != kind {
        return Err(crate::Error::Config(format!(
            "provider `{}` is a {} provider, expected {kind}",
            config.name, config.kind
        )));
    }
    Ok(())
}

#[derive(Debug)]
pub struct HttpTranslator {
    client: HttpClient,
}

impl HttpTranslator {
    pub fn new(config: ProviderConfig) -> Result<Self, crate::Error> {
        expect_kind(&config, ProviderKind::Translate)?;
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }

    pub fn client(&self) -> &HttpClient {
        &self.client
    }
}

impl Translator for HttpTranslator {
    fn name(&self) -> &str {
        self.client.name()
    }

    fn translate(&self, request: &TranslateRequest<'_>) -> Result<Vec<String>, ProviderError> {
        let body = TranslateBody {
            text: request.text.to_string(),
            src: request.src.code().to_string(),
            tgt: request.tgt.code().to_string(),
            style: request.style.map(str::to_string),
            n: request.n,
        };
        self.client
            .post(&body, |r: TranslateResponse| check_candidates(r.candidates))
    }
}

#[derive(Debug)]
pub struct HttpJudge {
    client: HttpClient,
    prompt_template: String,
}

impl HttpJudge {
    pub fn new(config: ProviderConfig, prompt_template: impl Into<String>) -> Result<Self, crate::Error> {
        expect_kind(&config, ProviderKind::Judge)?;
        Ok(Self {
            client: HttpClient::new(config)?,
            prompt_template: prompt_template.into(),
        })
    }
}

impl Judge for HttpJudge {
    fn name(&self) -> &str {
        self.client.name()
    }

    fn judge(&self, request: &JudgeRequest<'_>) -> Result<Winner, ProviderError> {
        let rubric = if request.rubric_prompt.is_empty() {
            render_prompt(&self.prompt_template, request)
        } else {
            request.rubric_prompt.to_string()
        };
        let body = JudgeBody {
            src_text: request.source_text.to_string(),
            a: request.a.to_string(),
            b: request.b.to_string(),
            rubric,
        };
        self.client.post(&body, |r: JudgeResponse| Ok(r.winner))
    }
}

#[derive(Debug)]
pub struct HttpScorer {
    client: HttpClient,
}

impl HttpScorer {
    pub fn new(config: ProviderConfig) -> Result<Self, crate::Error> {
        expect_kind(&config, ProviderKind::Score)?;
        Ok(Self {
            client: HttpClient::new(config)?,
        })
    }
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        self.client.name()
    }

    fn score(&self, source: &str, hypothesis: &str, reference: &str) -> Result<f64, ProviderError> {
        let body = ScoreBody {
            src: source.to_string(),
            hyp: hypothesis.to_string(),
            reference: reference.to_string(),
        };
        self.client.post(&body, |r: ScoreResponse| check_score(r.score))
    }
}

/// Remote embedder; responses must have exactly `dim` finite components.
#[derive(Debug)]
pub struct HttpEmbedder {
    client: HttpClient,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(config: ProviderConfig, dim: usize) -> Result<Self, crate::Error> {
        expect_kind(&config, ProviderKind::Embed)?;
        Ok(Self {
            client: HttpClient::new(config)?,
            dim,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let dim = self.dim;
        let values = self
            .client
            .post(&EmbedBody { text: text.to_string() }, |r: EmbedResponse| {
                check_embedding(r.embedding, Some(dim))
            })?;
        EmbeddingVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_field_names_are_exact() {
        let body = TranslateBody {
            text: "hi".into(),
            src: "en".into(),
            tgt: "es".into(),
            style: Some("polite".into()),
            n: 2,
        };
        assert_eq!(
            serde_json::to_string(&body).unwrap(),
            r#"{"text":"hi","src":"en","tgt":"es","style":"polite","n":2}"#
        );
        let judge = JudgeBody {
            src_text: "s".into(),
            a: "x".into(),
            b: "y".into(),
            rubric: "r".into(),
        };
        assert_eq!(
            serde_json::to_string(&judge).unwrap(),
            r#"{"src_text":"s","a":"x","b":"y","rubric":"r"}"#
        );
        let score = ScoreBody { src: "s".into(), hyp: "h".into(), reference: "r".into() };
        assert_eq!(serde_json::to_string(&score).unwrap(), r#"{"src":"s","hyp":"h","ref":"r"}"#);
    }

    #[test]
    fn judge_response_must_name_a_or_b() {
        assert!(decode_response(ProviderKind::Judge, br#"{"winner":"a"}"#).is_ok());
        assert!(decode_response(ProviderKind::Judge, br#"{"winner":"b"}"#).is_ok());
        assert!(decode_response(ProviderKind::Judge, br#"{"winner":"A"}"#).is_err());
        assert!(decode_response(ProviderKind::Judge, br#"{"winner":"both"}"#).is_err());
        assert!(decode_response(ProviderKind::Judge, b"garbage").is_err());
    }

    #[test]
    fn translate_response_validation() {
        assert!(decode_response(ProviderKind::Translate, br#"{"candidates":["x"]}"#).is_ok());
        assert!(decode_response(ProviderKind::Translate, br#"{"candidates":[]}"#).is_err());
        assert!(decode_response(ProviderKind::Translate, br#"{"candidates":[""]}"#).is_err());
        assert!(decode_response(ProviderKind::Score, br#"{"score":0.5}"#).is_ok());
        assert!(decode_response(ProviderKind::Embed, br#"{"embedding":[]}"#).is_err());
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let cfg = ProviderConfig::new(
            "j",
            ProviderKind::Judge,
            url::Url::parse("http://127.0.0.1:9/").unwrap(),
        );
        assert!(HttpTranslator::new(cfg.clone()).is_err());
        assert!(HttpJudge::new(cfg, "").is_ok());
    }
}

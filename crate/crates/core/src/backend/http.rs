//! HTTP client for remote scoring backends.
//!
//! The toolkit is the client; any server speaking this protocol can plug in:
//!
//! - `POST /v1/score`    `{"text"}` -> `{"vocab_size", "tokens": [{"token", "logprob", "rank", "entropy"}]}`
//! - `POST /v1/generate` `{"prompt", "max_tokens", "decoding"}` -> `{"text"}`
//! - `POST /v1/perturb`  `{"text", "n", "mask_fraction", "span_length", "seed"}` -> `{"perturbations": [..]}`
//!
//! The default endpoint comes from the `DETECTLLM_BACKEND_URL` env var.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, DecodingConfig, BACKEND_URL_ENV};
use crate::error::BackendError;
use crate::perturb::PerturbationConfig;
use crate::stats::{TextStats, TokenStats};

pub struct HttpBackend {
    base_url: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    vocab_size: usize,
    tokens: Vec<TokenStats>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
    decoding: &'a DecodingConfig,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Serialize)]
struct PerturbRequest<'a> {
    text: &'a str,
    n: usize,
    mask_fraction: f64,
    span_length: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct PerturbResponse {
    perturbations: Vec<String>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Result<HttpBackend, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Unavailable {
                reason: format!("building http client: {e}"),
            })?;
        Ok(HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            client,
        })
    }

    /// Connects to the endpoint named by `DETECTLLM_BACKEND_URL`.
    pub fn from_env() -> Result<HttpBackend, BackendError> {
        match std::env::var(BACKEND_URL_ENV) {
            Ok(url) if !url.is_empty() => HttpBackend::new(url),
            _ => Err(BackendError::InvalidConfig {
                reason: format!("{BACKEND_URL_ENV} is not set; pass --url or export it"),
            }),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = format!("{}{path}", self.base_url);
        let response = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| BackendError::Unavailable {
                reason: format!("POST {url}: {e}"),
            })?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(BackendError::Protocol {
                reason: format!("POST {url} returned {status}: {detail}"),
            });
        }
        response.json().map_err(|e| BackendError::Protocol {
            reason: format!("decoding response from {url}: {e}"),
        })
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn score_text(&self, text: &str) -> Result<TextStats, BackendError> {
        let resp: ScoreResponse = self.post("/v1/score", &ScoreRequest { text })?;
        if resp.tokens.len() < 2 {
            return Err(BackendError::TextTooShort {
                tokens: resp.tokens.len(),
            });
        }
        let stats = TextStats {
            id: String::new(),
            backend_id: self.id(),
            vocab_size: resp.vocab_size,
            scored_from: 1,
            truncated: false,
            tokens: resp.tokens,
        };
        stats.validate()?;
        Ok(stats)
    }

    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        cfg: &DecodingConfig,
    ) -> Result<String, BackendError> {
        cfg.validate()?;
        let resp: GenerateResponse = self.post(
            "/v1/generate",
            &GenerateRequest {
                prompt,
                max_tokens,
                decoding: cfg,
            },
        )?;
        Ok(resp.text)
    }

    /// The wire protocol has no tokenize endpoint; token boundaries come from
    /// the scoring response, which uses the server's own tokenizer.
    fn tokenize(&self, text: &str) -> Result<Vec<String>, BackendError> {
        let stats = self.score_text(text)?;
        Ok(stats.tokens.into_iter().map(|t| t.token_text).collect())
    }

    /// Remote tokens carry their own spacing (byte-pair style), so joining is
    /// plain concatenation.
    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.concat()
    }

    fn perturb(&self, text: &str, cfg: &PerturbationConfig) -> Result<Vec<String>, BackendError> {
        let resp: PerturbResponse = self.post(
            "/v1/perturb",
            &PerturbRequest {
                text,
                n: cfg.n,
                mask_fraction: cfg.mask_fraction,
                span_length: cfg.span_length,
                seed: cfg.seed,
            },
        )?;
        Ok(resp.perturbations)
    }
}

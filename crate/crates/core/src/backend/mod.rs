//! Uniform abstraction over causal language models that can score tokens,
//! generate continuations, and (optionally) fill masked spans.
//!
//! Three implementations ship with the toolkit: a deterministic in-process
//! n-gram [`ToyBackend`] used as the desk-scale oracle, an [`HttpBackend`]
//! client speaking the `/v1/score` + `/v1/generate` + `/v1/perturb` wire
//! protocol, and an offline stats-JSONL loader for pre-scored passages.

mod http;
mod offline;
mod toy;

pub use http::HttpBackend;
pub use offline::{load_offline_stats, write_stats_jsonl, StatsReader};
pub use toy::{ToyBackend, ToyModel};

use serde::{Deserialize, Serialize};

use crate::error::BackendError;
use crate::perturb::PerturbationConfig;
use crate::stats::TextStats;

/// Environment variable naming the default HTTP scoring endpoint.
pub const BACKEND_URL_ENV: &str = "DETECTLLM_BACKEND_URL";

/// Decoding controls for generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingStrategy {
    Temperature,
    TopK,
    TopP,
}

impl std::fmt::Display for DecodingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodingStrategy::Temperature => write!(f, "temperature"),
            DecodingStrategy::TopK => write!(f, "top_k"),
            DecodingStrategy::TopP => write!(f, "top_p"),
        }
    }
}

fn default_temperature() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Generation configuration: exactly one strategy is active; `k` is used iff
/// `top_k`, `p` iff `top_p`. Temperature defaults to 1.0 and applies to every
/// strategy; the `greedy` flag short-circuits sampling to the argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub strategy: DecodingStrategy,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub greedy: bool,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig::temperature(1.0, 0)
    }
}

impl DecodingConfig {
    pub fn temperature(temperature: f64, seed: u64) -> Self {
        DecodingConfig {
            strategy: DecodingStrategy::Temperature,
            temperature,
            k: None,
            p: None,
            seed,
            greedy: false,
        }
    }

    pub fn top_k(k: u32, seed: u64) -> Self {
        DecodingConfig {
            strategy: DecodingStrategy::TopK,
            temperature: 1.0,
            k: Some(k),
            p: None,
            seed,
            greedy: false,
        }
    }

    pub fn top_p(p: f64, seed: u64) -> Self {
        DecodingConfig {
            strategy: DecodingStrategy::TopP,
            temperature: 1.0,
            k: None,
            p: Some(p),
            seed,
            greedy: false,
        }
    }

    /// Argmax decoding, reproducible without a usable temperature.
    pub fn greedy(seed: u64) -> Self {
        DecodingConfig {
            greedy: true,
            ..DecodingConfig::temperature(1.0, seed)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let invalid = |reason: String| Err(BackendError::InvalidConfig { reason });
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return invalid(format!("temperature {} must be > 0", self.temperature));
        }
        match self.strategy {
            DecodingStrategy::Temperature => {
                if self.k.is_some() || self.p.is_some() {
                    return invalid("temperature strategy takes neither k nor p".into());
                }
            }
            DecodingStrategy::TopK => {
                if self.p.is_some() {
                    return invalid("top_k strategy does not take p".into());
                }
                match self.k {
                    Some(k) if k >= 1 => {}
                    Some(k) => return invalid(format!("k {k} must be >= 1")),
                    None => return invalid("top_k strategy requires k".into()),
                }
            }
            DecodingStrategy::TopP => {
                if self.k.is_some() {
                    return invalid("top_p strategy does not take k".into());
                }
                match self.p {
                    Some(p) if p > 0.0 && p <= 1.0 => {}
                    Some(p) => return invalid(format!("p {p} must be in (0, 1]")),
                    None => return invalid("top_p strategy requires p".into()),
                }
            }
        }
        Ok(())
    }
}

/// A handle to a causal language model.
///
/// Scoring and generation are pure with respect to toolkit state. A handle
/// reporting `supports_concurrency() == false` declares itself single-session
/// and the harness serializes calls to it.
pub trait Backend: Send + Sync {
    /// Stable identifier recorded in every `TextStats` and report.
    fn id(&self) -> String;

    /// Scores every position of `text` under the backend's own tokenizer.
    fn score_text(&self, text: &str) -> Result<TextStats, BackendError>;

    /// Generates a prompt-conditioned continuation (the prompt is not echoed).
    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        cfg: &DecodingConfig,
    ) -> Result<String, BackendError>;

    /// Segments `text` with the backend's tokenizer. Tokenization is
    /// backend-owned; the toolkit never re-tokenizes.
    fn tokenize(&self, text: &str) -> Result<Vec<String>, BackendError>;

    /// Joins tokens back into text under the backend's conventions.
    fn detokenize(&self, tokens: &[String]) -> String;

    /// Produces `cfg.n` mask-fill rewrites of `text`. Only backends exposing
    /// `/v1/perturb` support this.
    fn perturb(&self, text: &str, cfg: &PerturbationConfig) -> Result<Vec<String>, BackendError> {
        let _ = (text, cfg);
        Err(BackendError::Unavailable {
            reason: format!("backend {} does not support mask-fill perturbation", self.id()),
        })
    }

    fn supports_concurrency(&self) -> bool {
        true
    }
}

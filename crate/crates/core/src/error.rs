//! Error types for the scoring backends, perturber, detectors, and harness.

use thiserror::Error;

/// Errors raised by scoring/generation backends and the offline stats loader.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Transport failure or a backend that cannot serve the request at all.
    #[error("backend unavailable: {reason}")]
    Unavailable { reason: String },

    /// The input text tokenizes to fewer than two tokens.
    #[error("text too short: {tokens} token(s), need at least 2")]
    TextTooShort { tokens: usize },

    /// Loaded or received statistics disagree with the declared vocabulary size.
    #[error("vocabulary mismatch: {reason}")]
    VocabMismatch { reason: String },

    /// The backend cannot honor the requested decoding strategy.
    #[error("unsupported decoding strategy: {reason}")]
    UnsupportedStrategy { reason: String },

    /// Training was requested on an empty corpus.
    #[error("empty corpus")]
    EmptyCorpus,

    /// A request or configuration is malformed before it reaches the backend.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// A stats-JSONL line could not be parsed.
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// A loaded record violates a per-token or per-text invariant.
    #[error("invariant violation in record {id:?}: {reason}")]
    InvariantViolation { id: String, reason: String },

    /// The backend answered, but with a malformed or out-of-contract response.
    #[error("protocol error: {reason}")]
    Protocol { reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors raised by the perturbation engine.
#[derive(Debug, Error)]
pub enum PerturbError {
    /// Not enough words to place a single masked span.
    #[error("text too short to perturb: {words} word(s), need at least {required}")]
    TextTooShort { words: usize, required: usize },

    /// A variant could not be made to differ from the original after redraws.
    #[error("fill failure for variant {variant}: {reason}")]
    FillFailure { variant: usize, reason: String },

    #[error("invalid perturbation config: {reason}")]
    InvalidConfig { reason: String },

    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Errors raised by the detector statistics.
#[derive(Debug, Error)]
pub enum DetectError {
    /// The text statistics carry no scored positions.
    #[error("empty stats: no scored positions")]
    EmptyStats,

    /// A perturbation-based detector was invoked with no perturbed stats.
    #[error("no perturbations supplied")]
    NoPerturbations,

    /// Sum signs violate the contract (log-probs must be <= 0, log-ranks >= 0).
    #[error("invariant violation: {reason}")]
    InvariantViolation { reason: String },
}

/// Errors raised by evaluation: AUROC, benchmarking, and the cost model.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty score list: {which}")]
    EmptyScoreList { which: &'static str },

    #[error("non-finite score in {which} list")]
    NonFiniteScore { which: &'static str },

    #[error("report is missing AUROC for method {method}")]
    MissingMethod { method: String },

    #[error("invalid cost model: {reason}")]
    InvalidCostModel { reason: String },

    /// Perturbation-based methods were requested without a perturbation config.
    #[error("method {method} requires a perturbation config")]
    PerturbationConfigRequired { method: String },

    /// Every sample failed; there is nothing to rank.
    #[error("no usable samples: {failed} of {total} pairs failed")]
    NoUsableSamples { failed: usize, total: usize },

    #[error("benchmark received an empty pair list")]
    NoPairs,
}

/// Errors raised while building paired datasets.
#[derive(Debug, Error)]
pub enum DatasetError {
    /// Fewer eligible human texts than requested pairs.
    #[error("insufficient corpus: {eligible} eligible text(s), need {required}")]
    InsufficientCorpus { eligible: usize, required: usize },

    #[error("invalid dataset config: {reason}")]
    InvalidConfig { reason: String },

    #[error(transparent)]
    Backend(#[from] BackendError),
}

//! Zero-shot machine-generated-text detection.
//!
//! The toolkit computes seven detection statistics over per-token language
//! model scores — log-likelihood, rank, log-rank, entropy, the
//! log-likelihood/log-rank ratio (LRR), the perturbation discrepancy
//! (DetectGPT), and the normalized perturbed log-rank (NPR) — and benchmarks
//! them with AUROC over paired human/machine datasets. Token scoring is
//! pluggable: an in-process n-gram toy model, an HTTP client for real model
//! servers, or pre-scored offline stats.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`stats`]: per-token and per-text scoring records.
//! - [`backend`]: scoring/generation backends and the stats-JSONL loader.
//! - [`perturb`]: span-replacement rewrites for the perturbation methods.
//! - [`detect`]: the seven detector statistics.
//! - [`eval`]: AUROC, benchmark orchestration, and the runtime cost model.
//! - [`datagen`]: paired human/machine dataset construction.
//! - [`fixture`]: deterministic sample corpora for tests and demos.

pub mod backend;
pub mod datagen;
pub mod detect;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod perturb;
pub mod stats;

pub use backend::{
    Backend, DecodingConfig, DecodingStrategy, HttpBackend, ToyBackend, ToyModel,
    BACKEND_URL_ENV,
};
pub use datagen::{DatagenConfig, DatasetBuild, DatasetMetadata, PairedSample};
pub use detect::{DetectorScore, Method, DEGENERATE_MAX, EPSILON};
pub use error::{BackendError, DatasetError, DetectError, EvalError, PerturbError};
pub use eval::{
    auroc, estimate_cost, recommend_method, run_benchmark, BenchmarkConfig, BenchmarkOutcome,
    BenchmarkReport, CostModel, ScoreRecord, TextLabel,
};
pub use perturb::{PerturbationConfig, PerturbationPolicy, PerturbationSet};
pub use stats::{TextStats, TokenStats};

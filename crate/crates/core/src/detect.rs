//! The seven zero-shot detection statistics.
//!
//! Every operation returns a [`DetectorScore`] sharing one orientation:
//! higher value means more likely machine-generated. Sign folding happens
//! here (rank and log-rank are negated), so downstream AUROC needs no
//! per-method convention.
//!
//! Degenerate denominators (an all-rank-1 text has zero total log rank, the
//! greedy-decoding signature) map to [`DEGENERATE_MAX`] with the flag set, so
//! ranking still treats them as maximal machine evidence.

use serde::{Deserialize, Serialize};

use crate::error::DetectError;
use crate::stats::TextStats;

/// Threshold below which a denominator counts as vanished.
pub const EPSILON: f64 = 1e-6;
/// Sentinel score for degenerate cases; finite so ranking still works.
pub const DEGENERATE_MAX: f64 = 1e9;

/// The seven detection statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LogP,
    Rank,
    LogRank,
    Entropy,
    Lrr,
    DetectGpt,
    Npr,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::LogP,
        Method::Rank,
        Method::LogRank,
        Method::Entropy,
        Method::Lrr,
        Method::DetectGpt,
        Method::Npr,
    ];

    /// DetectGPT and NPR need perturbed stats; the rest only query the text.
    pub fn requires_perturbations(&self) -> bool {
        matches!(self, Method::DetectGpt | Method::Npr)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::LogP => "log_p",
            Method::Rank => "rank",
            Method::LogRank => "log_rank",
            Method::Entropy => "entropy",
            Method::Lrr => "lrr",
            Method::DetectGpt => "detect_gpt",
            Method::Npr => "npr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "log_p" | "logp" | "log_likelihood" | "likelihood" => Ok(Method::LogP),
            "rank" => Ok(Method::Rank),
            "log_rank" | "logrank" => Ok(Method::LogRank),
            "entropy" => Ok(Method::Entropy),
            "lrr" => Ok(Method::Lrr),
            "detect_gpt" | "detectgpt" => Ok(Method::DetectGpt),
            "npr" => Ok(Method::Npr),
            other => Err(format!(
                "unknown method {other:?}; expected one of log_p, rank, log_rank, entropy, lrr, detect_gpt, npr"
            )),
        }
    }
}

/// A detector's scalar output.
///
/// `value` is oriented so that higher means more likely machine-generated,
/// identically for every method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    pub method: Method,
    pub value: f64,
    pub degenerate: bool,
    pub n_perturbations_used: usize,
}

impl DetectorScore {
    pub const ORIENTATION: &'static str = "higher means more likely machine-generated";

    fn plain(method: Method, value: f64) -> DetectorScore {
        DetectorScore {
            method,
            value,
            degenerate: false,
            n_perturbations_used: 0,
        }
    }

    fn degenerate(method: Method, n_perturbations_used: usize) -> DetectorScore {
        DetectorScore {
            method,
            value: DEGENERATE_MAX,
            degenerate: true,
            n_perturbations_used,
        }
    }
}

fn nonempty(s: &TextStats) -> Result<(), DetectError> {
    if s.tokens.is_empty() {
        Err(DetectError::EmptyStats)
    } else {
        Ok(())
    }
}

fn mean_log_prob(s: &TextStats) -> f64 {
    s.tokens.iter().map(|t| t.log_prob).sum::<f64>() / s.len() as f64
}

fn mean_log_rank(s: &TextStats) -> f64 {
    s.tokens.iter().map(|t| (t.rank as f64).ln()).sum::<f64>() / s.len() as f64
}

/// Mean token-wise log probability.
pub fn log_p_score(s: &TextStats) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    Ok(DetectorScore::plain(Method::LogP, mean_log_prob(s)))
}

/// Negated mean rank: smaller average rank means machine, so the sign folds.
pub fn rank_score(s: &TextStats) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    let mean = s.tokens.iter().map(|t| t.rank as f64).sum::<f64>() / s.len() as f64;
    Ok(DetectorScore::plain(Method::Rank, -mean))
}

/// Negated mean log rank; an all-rank-1 text scores 0, the maximum.
pub fn log_rank_score(s: &TextStats) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    Ok(DetectorScore::plain(Method::LogRank, -mean_log_rank(s)))
}

/// Mean predictive entropy.
pub fn entropy_score(s: &TextStats) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    let mean = s.tokens.iter().map(|t| t.entropy).sum::<f64>() / s.len() as f64;
    Ok(DetectorScore::plain(Method::Entropy, mean))
}

/// Log-likelihood log-rank ratio: `-(sum log p) / (sum ln rank)`.
///
/// Valid stats force `sum log p <= 0` and `sum ln rank >= 0`; a violation is
/// reported rather than silently re-signed. A vanishing denominator (all
/// ranks 1) is degenerate.
pub fn lrr(s: &TextStats) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    let sum_log_p: f64 = s.tokens.iter().map(|t| t.log_prob).sum();
    let sum_log_rank: f64 = s.tokens.iter().map(|t| (t.rank as f64).ln()).sum();
    if sum_log_p > 0.0 {
        return Err(DetectError::InvariantViolation {
            reason: format!("sum of log probabilities is positive ({sum_log_p})"),
        });
    }
    if sum_log_rank < 0.0 {
        return Err(DetectError::InvariantViolation {
            reason: format!("sum of log ranks is negative ({sum_log_rank})"),
        });
    }
    if sum_log_rank < EPSILON {
        return Ok(DetectorScore::degenerate(Method::Lrr, 0));
    }
    Ok(DetectorScore::plain(Method::Lrr, -sum_log_p / sum_log_rank))
}

/// Perturbation discrepancy: original mean log-likelihood minus the mean over
/// perturbed texts. With `normalize`, the difference is divided by the sample
/// standard deviation of the perturbed means (degenerate when it vanishes).
pub fn detect_gpt(
    s: &TextStats,
    perturbed: &[TextStats],
    normalize: bool,
) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    if perturbed.is_empty() {
        return Err(DetectError::NoPerturbations);
    }
    for p in perturbed {
        nonempty(p)?;
    }
    let n = perturbed.len();
    let base = mean_log_prob(s);
    // Averaging per-perturbation differences keeps identity sets at exactly 0.
    let diff = perturbed
        .iter()
        .map(|p| base - mean_log_prob(p))
        .sum::<f64>()
        / n as f64;
    if !normalize {
        return Ok(DetectorScore {
            n_perturbations_used: n,
            ..DetectorScore::plain(Method::DetectGpt, diff)
        });
    }
    if n < 2 {
        return Ok(DetectorScore::degenerate(Method::DetectGpt, n));
    }
    let perturbed_means: Vec<f64> = perturbed.iter().map(mean_log_prob).collect();
    let mean = perturbed_means.iter().sum::<f64>() / n as f64;
    let var = perturbed_means
        .iter()
        .map(|m| (m - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let std = var.sqrt();
    if std < EPSILON {
        return Ok(DetectorScore::degenerate(Method::DetectGpt, n));
    }
    Ok(DetectorScore {
        n_perturbations_used: n,
        ..DetectorScore::plain(Method::DetectGpt, diff / std)
    })
}

/// Normalized perturbed log rank: mean perturbed log rank over the original's
/// log rank, with per-token means on both sides. An all-rank-1 original is
/// degenerate (itself maximal machine evidence).
pub fn npr(s: &TextStats, perturbed: &[TextStats]) -> Result<DetectorScore, DetectError> {
    nonempty(s)?;
    if perturbed.is_empty() {
        return Err(DetectError::NoPerturbations);
    }
    for p in perturbed {
        nonempty(p)?;
    }
    let n = perturbed.len();
    let denom = mean_log_rank(s);
    if denom < EPSILON {
        return Ok(DetectorScore::degenerate(Method::Npr, n));
    }
    // Averaging per-perturbation ratios keeps identity sets at exactly 1.
    let value = perturbed
        .iter()
        .map(|p| mean_log_rank(p) / denom)
        .sum::<f64>()
        / n as f64;
    Ok(DetectorScore {
        n_perturbations_used: n,
        ..DetectorScore::plain(Method::Npr, value)
    })
}

/// Dispatches any method; perturbation-based methods require `perturbed`.
pub fn score_with(
    method: Method,
    s: &TextStats,
    perturbed: Option<&[TextStats]>,
    normalize_detect_gpt: bool,
) -> Result<DetectorScore, DetectError> {
    match method {
        Method::LogP => log_p_score(s),
        Method::Rank => rank_score(s),
        Method::LogRank => log_rank_score(s),
        Method::Entropy => entropy_score(s),
        Method::Lrr => lrr(s),
        Method::DetectGpt => {
            detect_gpt(s, perturbed.ok_or(DetectError::NoPerturbations)?, normalize_detect_gpt)
        }
        Method::Npr => npr(s, perturbed.ok_or(DetectError::NoPerturbations)?),
    }
}

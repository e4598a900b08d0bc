//! Per-token and per-text scoring records.
//!
//! `TokenStats` is the atom every detector consumes: the scoring model's
//! log-probability, rank, and predictive entropy for one observed token.
//! `TextStats` is the ordered sequence of those atoms for one passage,
//! together with provenance (which backend scored it, from which position,
//! against which vocabulary).

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

/// Statistics for a single scored position.
///
/// Invariants: `log_prob` is finite and <= 0 (a probability in (0,1]),
/// `rank >= 1`, and `0 <= entropy <= ln(vocab_size)` (nats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    /// The observed token, as segmented by the scoring backend's tokenizer.
    #[serde(rename = "token")]
    pub token_text: String,
    /// Natural log of the probability the model assigned to the observed token.
    #[serde(rename = "logprob")]
    pub log_prob: f64,
    /// Position of the observed token in the probability-sorted vocabulary;
    /// ties share the better rank: `rank = 1 + |{v : P(v) > P(observed)}|`.
    pub rank: u32,
    /// Shannon entropy of the full predictive distribution at this position, in nats.
    pub entropy: f64,
}

/// Ordered token statistics for one passage, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub id: String,
    pub backend_id: String,
    /// Size of the scoring model's vocabulary; bounds rank and entropy.
    pub vocab_size: usize,
    /// First scored position in the passage, 1-based. Positions before it
    /// (e.g. a shared prompt) were deliberately excluded from `tokens`.
    pub scored_from: usize,
    /// Set when the backend capped the number of scored positions.
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
    pub tokens: Vec<TokenStats>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Slack for comparing entropy against its ln(V) upper bound.
const ENTROPY_BOUND_SLACK: f64 = 1e-9;

impl TextStats {
    /// Number of scored positions (the `t` every detector averages over).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks every per-token invariant plus cross-field consistency with
    /// the declared vocabulary size.
    pub fn validate(&self) -> Result<(), BackendError> {
        let fail = |reason: String| -> Result<(), BackendError> {
            Err(BackendError::InvariantViolation {
                id: self.id.clone(),
                reason,
            })
        };
        if self.vocab_size < 1 {
            return fail(format!("vocab_size {} must be >= 1", self.vocab_size));
        }
        if self.scored_from < 1 {
            return fail(format!("scored_from {} must be >= 1", self.scored_from));
        }
        let max_entropy = (self.vocab_size as f64).ln() + ENTROPY_BOUND_SLACK;
        for (i, tok) in self.tokens.iter().enumerate() {
            if !tok.log_prob.is_finite() || tok.log_prob > 0.0 {
                return fail(format!(
                    "token {i} ({:?}): log_prob {} outside (-inf, 0]",
                    tok.token_text, tok.log_prob
                ));
            }
            if tok.rank < 1 {
                return fail(format!("token {i} ({:?}): rank 0", tok.token_text));
            }
            if tok.rank as usize > self.vocab_size {
                return Err(BackendError::VocabMismatch {
                    reason: format!(
                        "record {:?}: token {i} rank {} exceeds vocab_size {}",
                        self.id, tok.rank, self.vocab_size
                    ),
                });
            }
            if !tok.entropy.is_finite() || tok.entropy < 0.0 {
                return fail(format!(
                    "token {i} ({:?}): entropy {} not in [0, ln V]",
                    tok.token_text, tok.entropy
                ));
            }
            if tok.entropy > max_entropy {
                return Err(BackendError::VocabMismatch {
                    reason: format!(
                        "record {:?}: token {i} entropy {} exceeds ln({}) = {}",
                        self.id,
                        tok.entropy,
                        self.vocab_size,
                        (self.vocab_size as f64).ln()
                    ),
                });
            }
        }
        Ok(())
    }

    /// Drops the first `prompt_len` scored positions, shifting `scored_from`.
    /// Returns `None` when nothing would remain.
    pub fn without_prompt(&self, prompt_len: usize) -> Option<TextStats> {
        if prompt_len == 0 {
            return Some(self.clone());
        }
        if self.tokens.len() <= prompt_len {
            return None;
        }
        let mut out = self.clone();
        out.tokens.drain(..prompt_len);
        out.scored_from += prompt_len;
        Some(out)
    }
}

/// Computes (log_prob, rank, entropy) for an observed token given the full
/// predictive distribution at its position.
///
/// This is the one place the three statistics are defined; backends and test
/// oracles both call it or reimplement it against the same contract.
pub fn position_stats(probs: &[f64], observed: usize) -> (f64, u32, f64) {
    let p = probs[observed];
    let log_prob = p.ln();
    let rank = 1 + probs.iter().filter(|&&q| q > p).count() as u32;
    let entropy = -probs
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| q * q.ln())
        .sum::<f64>();
    (log_prob, rank, entropy)
}

//! Paired-dataset builder: prompts a generation backend with the opening
//! tokens of human texts and keeps (human, machine) pairs that share a prompt.
//!
//! "Token" here means the generation backend's token (word tokens for the toy
//! backend). Human texts are lightly normalized (unicode NFC, whitespace
//! collapse) before slicing; that is recorded in the dataset metadata.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::backend::{Backend, DecodingConfig};
use crate::error::{BackendError, DatasetError};
use crate::eval::derive_seed;

/// Opening tokens shared by both texts of a pair.
pub const DEFAULT_PROMPT_TOKENS: usize = 30;
/// Pairs per dataset.
pub const DEFAULT_N_PAIRS: usize = 300;
/// Minimum machine continuation length, in backend tokens.
pub const DEFAULT_MIN_LEN: usize = 50;
/// Generation attempts per text before it is skipped.
const MAX_ATTEMPTS: u64 = 3;

/// One human passage and its machine continuation sharing a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub id: String,
    pub human_text: String,
    pub machine_text: String,
    /// The shared opening tokens, as rendered by the backend's detokenizer.
    pub prompt: String,
    pub decoding: DecodingConfig,
    pub backend_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub prompt_tokens: usize,
    pub n_pairs: usize,
    pub min_len: usize,
    pub decoding: DecodingConfig,
    pub seed: u64,
    /// Continuation budget; `None` matches each human text's own length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            prompt_tokens: DEFAULT_PROMPT_TOKENS,
            n_pairs: DEFAULT_N_PAIRS,
            min_len: DEFAULT_MIN_LEN,
            decoding: DecodingConfig::default(),
            seed: 0,
            max_tokens: None,
        }
    }
}

impl DatagenConfig {
    fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |reason: String| Err(DatasetError::InvalidConfig { reason });
        if self.prompt_tokens < 1 {
            return invalid("prompt_tokens must be >= 1".into());
        }
        if self.n_pairs < 1 {
            return invalid("n_pairs must be >= 1".into());
        }
        if self.min_len < 1 {
            return invalid("min_len must be >= 1".into());
        }
        self.decoding
            .validate()
            .map_err(|e| DatasetError::InvalidConfig {
                reason: e.to_string(),
            })
    }
}

/// Sidecar metadata written next to every dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub corpus_source: String,
    pub backend_id: String,
    pub config: DatagenConfig,
    pub normalization: String,
    pub eligible_texts: usize,
    pub produced_pairs: usize,
    pub skipped_too_short: usize,
    pub skipped_degenerate: usize,
    pub resampled_generations: usize,
}

/// A built dataset: the pairs plus the metadata describing how they came to be.
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub pairs: Vec<PairedSample>,
    pub metadata: DatasetMetadata,
}

/// Unicode NFC plus whitespace collapse.
pub fn normalize_text(text: &str) -> String {
    text.nfc()
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Builds up to `cfg.n_pairs` paired samples.
///
/// Texts shorter than `prompt_tokens + min_len` tokens are skipped up front;
/// it is an error to have fewer eligible texts than requested pairs.
/// Generations that come back empty, all-repetition, shorter than `min_len`,
/// or identical to the human continuation are resampled up to three times and
/// then the text is skipped (counted in metadata). Output ordering follows
/// input order regardless of generation scheduling.
pub fn build_pairs(
    human_texts: &[String],
    backend: &dyn Backend,
    cfg: &DatagenConfig,
) -> Result<DatasetBuild, DatasetError> {
    cfg.validate()?;

    struct Eligible {
        tokens: Vec<String>,
        normalized: String,
    }

    let mut skipped_too_short = 0usize;
    let mut eligible: Vec<Eligible> = Vec::new();
    for text in human_texts {
        let normalized = normalize_text(text);
        let tokens = backend.tokenize(&normalized)?;
        if tokens.len() >= cfg.prompt_tokens + cfg.min_len {
            eligible.push(Eligible { tokens, normalized });
        } else {
            skipped_too_short += 1;
        }
    }
    if eligible.len() < cfg.n_pairs {
        return Err(DatasetError::InsufficientCorpus {
            eligible: eligible.len(),
            required: cfg.n_pairs,
        });
    }

    let generate_one = |(idx, text): (usize, &Eligible)| -> Result<(PairedSample, u64), String> {
        let prompt = backend.detokenize(&text.tokens[..cfg.prompt_tokens]);
        let budget = cfg
            .max_tokens
            .unwrap_or(text.tokens.len() - cfg.prompt_tokens)
            .max(cfg.min_len);
        let human_continuation = backend.detokenize(&text.tokens[cfg.prompt_tokens..]);
        let mut resamples = 0u64;
        for attempt in 0..MAX_ATTEMPTS {
            let decoding = cfg
                .decoding
                .clone()
                .with_seed(derive_seed(cfg.seed, idx as u64, attempt));
            let continuation = backend
                .generate(&prompt, budget, &decoding)
                .map_err(|e| e.to_string())?;
            match continuation_defect(backend, &continuation, &human_continuation, cfg.min_len) {
                None => {
                    let sample = PairedSample {
                        id: format!("pair-{idx:05}"),
                        human_text: text.normalized.clone(),
                        machine_text: format!("{prompt} {continuation}"),
                        prompt: prompt.clone(),
                        decoding,
                        backend_id: backend.id(),
                    };
                    return Ok((sample, resamples));
                }
                Some(_) => resamples += 1,
            }
        }
        Err(format!("generation degenerate after {MAX_ATTEMPTS} attempts"))
    };

    // Generate in chunks of the still-needed count: deterministic (chunk
    // boundaries depend only on prior successes) without running the whole
    // corpus when few texts fail.
    let mut pairs: Vec<PairedSample> = Vec::with_capacity(cfg.n_pairs);
    let mut skipped_degenerate = 0usize;
    let mut resampled_generations = 0u64;
    let mut cursor = 0usize;
    while pairs.len() < cfg.n_pairs && cursor < eligible.len() {
        let need = cfg.n_pairs - pairs.len();
        let chunk_end = (cursor + need).min(eligible.len());
        let chunk: Vec<(usize, &Eligible)> =
            (cursor..chunk_end).map(|i| (i, &eligible[i])).collect();
        let results: Vec<Result<(PairedSample, u64), String>> = if backend.supports_concurrency() {
            chunk.into_par_iter().map(generate_one).collect()
        } else {
            chunk.into_iter().map(generate_one).collect()
        };
        for result in results {
            match result {
                Ok((sample, resamples)) => {
                    resampled_generations += resamples;
                    if pairs.len() < cfg.n_pairs {
                        pairs.push(sample);
                    }
                }
                Err(_) => skipped_degenerate += 1,
            }
        }
        cursor = chunk_end;
    }

    let metadata = DatasetMetadata {
        corpus_source: String::new(),
        backend_id: backend.id(),
        config: cfg.clone(),
        normalization: "unicode NFC + whitespace collapse".into(),
        eligible_texts: eligible.len(),
        produced_pairs: pairs.len(),
        skipped_too_short,
        skipped_degenerate,
        resampled_generations: resampled_generations as usize,
    };
    Ok(DatasetBuild { pairs, metadata })
}

/// Returns why a continuation is unusable, or `None` when it is fine.
fn continuation_defect(
    backend: &dyn Backend,
    continuation: &str,
    human_continuation: &str,
    min_len: usize,
) -> Option<&'static str> {
    let tokens = match backend.tokenize(continuation) {
        Ok(t) => t,
        Err(_) => return Some("untokenizable"),
    };
    if tokens.is_empty() {
        return Some("empty");
    }
    if tokens.len() < min_len {
        return Some("under minimum length");
    }
    if tokens.iter().all(|t| *t == tokens[0]) {
        return Some("all-repetition");
    }
    if continuation == human_continuation {
        return Some("identical to human continuation");
    }
    None
}

/// Writes one `PairedSample` JSON object per line.
pub fn write_pairs_jsonl(path: &Path, pairs: &[PairedSample]) -> Result<(), BackendError> {
    let mut w = BufWriter::new(File::create(path)?);
    for pair in pairs {
        let line = serde_json::to_string(pair).map_err(|e| BackendError::Protocol {
            reason: format!("serializing pair {:?}: {e}", pair.id),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a dataset written by [`write_pairs_jsonl`].
pub fn read_pairs_jsonl(path: &Path) -> Result<Vec<PairedSample>, BackendError> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: PairedSample = serde_json::from_str(&line).map_err(|e| BackendError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

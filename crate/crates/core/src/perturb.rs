//! Perturbation engine: produces n minor rewrites of a passage by replacing
//! non-overlapping word spans.
//!
//! Two policies: `mask_fill_backend` delegates masking and filling to a
//! backend exposing `/v1/perturb`; `lexical_local` replaces spans with words
//! drawn from a bundled frequency-ranked lexicon, deterministically given the
//! seed, which makes it the offline desk-scale substitute.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::PerturbError;

/// Perturbation count used throughout when nothing else is requested.
pub const DEFAULT_PERTURBATIONS: usize = 50;
/// Fraction of words replaced per variant.
pub const DEFAULT_MASK_FRACTION: f64 = 0.15;
/// Words per masked span.
pub const DEFAULT_SPAN_LENGTH: usize = 2;
/// Redraw budget before a variant counts as a fill failure.
const MAX_REDRAWS: usize = 3;
/// A variant may shift the word count by at most this fraction.
const MAX_WORD_COUNT_DRIFT: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationPolicy {
    /// Mask spans and ask a fill model over `/v1/perturb`.
    MaskFillBackend,
    /// Replace spans from the bundled lexicon; offline and deterministic.
    LexicalLocal,
}

impl std::fmt::Display for PerturbationPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PerturbationPolicy::MaskFillBackend => write!(f, "mask_fill_backend"),
            PerturbationPolicy::LexicalLocal => write!(f, "lexical_local"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Number of perturbations per text.
    pub n: usize,
    pub mask_fraction: f64,
    pub span_length: usize,
    pub policy: PerturbationPolicy,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n: DEFAULT_PERTURBATIONS,
            mask_fraction: DEFAULT_MASK_FRACTION,
            span_length: DEFAULT_SPAN_LENGTH,
            policy: PerturbationPolicy::LexicalLocal,
            seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), PerturbError> {
        let invalid = |reason: String| Err(PerturbError::InvalidConfig { reason });
        if self.n < 1 {
            return invalid("n must be >= 1".into());
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return invalid(format!("mask_fraction {} must be in (0, 1)", self.mask_fraction));
        }
        if self.span_length < 1 {
            return invalid("span_length must be >= 1".into());
        }
        Ok(())
    }

    /// Minimum word count for a text to have one maskable span.
    pub fn min_words(&self) -> usize {
        (self.span_length as f64 / self.mask_fraction).ceil() as usize
    }
}

/// The n rewrites of one passage, with the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub original_id: String,
    pub variants: Vec<String>,
    pub config: PerturbationConfig,
}

/// Number of spans masked per variant: `ceil(mask_fraction * words / span)`,
/// clamped to what fits without overlap.
pub fn span_count(word_count: usize, cfg: &PerturbationConfig) -> usize {
    let wanted = (cfg.mask_fraction * word_count as f64 / cfg.span_length as f64).ceil() as usize;
    wanted.min(word_count / cfg.span_length).max(1)
}

/// Produces `cfg.n` rewrites of `text`. Each variant differs from the
/// original, replaces `span_count` non-overlapping spans, and keeps the word
/// count within 20% of the original.
pub fn perturb(
    text: &str,
    cfg: &PerturbationConfig,
    backend: Option<&dyn Backend>,
) -> Result<PerturbationSet, PerturbError> {
    cfg.validate()?;
    let words: Vec<&str> = text.split_whitespace().collect();
    let required = cfg.min_words();
    if words.len() < required {
        return Err(PerturbError::TextTooShort {
            words: words.len(),
            required,
        });
    }
    let variants = match cfg.policy {
        PerturbationPolicy::LexicalLocal => lexical_local_variants(&words, cfg)?,
        PerturbationPolicy::MaskFillBackend => {
            let backend = backend.ok_or_else(|| PerturbError::Backend(
                crate::error::BackendError::Unavailable {
                    reason: "mask_fill_backend policy requires a backend supporting /v1/perturb"
                        .into(),
                },
            ))?;
            backend_variants(text, &words, cfg, backend)?
        }
    };
    Ok(PerturbationSet {
        original_id: String::new(),
        variants,
        config: cfg.clone(),
    })
}

fn lexical_local_variants(
    words: &[&str],
    cfg: &PerturbationConfig,
) -> Result<Vec<String>, PerturbError> {
    let original = words.join(" ");
    let spans = span_count(words.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut variants = Vec::with_capacity(cfg.n);
    for v in 0..cfg.n {
        let mut accepted = None;
        for _ in 0..=MAX_REDRAWS {
            let starts = select_spans(words.len(), spans, cfg.span_length, &mut rng);
            let mut rewritten: Vec<&str> = words.to_vec();
            for &start in &starts {
                for slot in rewritten.iter_mut().skip(start).take(cfg.span_length) {
                    *slot = sample_lexicon(&mut rng);
                }
            }
            let candidate = rewritten.join(" ");
            if candidate != original {
                accepted = Some(candidate);
                break;
            }
        }
        match accepted {
            Some(c) => variants.push(c),
            None => {
                return Err(PerturbError::FillFailure {
                    variant: v,
                    reason: format!("variant equals the original after {MAX_REDRAWS} redraws"),
                })
            }
        }
    }
    Ok(variants)
}

fn backend_variants(
    text: &str,
    words: &[&str],
    cfg: &PerturbationConfig,
    backend: &dyn Backend,
) -> Result<Vec<String>, PerturbError> {
    let mut variants: Vec<String> = Vec::with_capacity(cfg.n);
    for attempt in 0..=MAX_REDRAWS {
        let missing = cfg.n - variants.len();
        if missing == 0 {
            break;
        }
        // Re-requests shift the seed so the server redraws, not replays.
        let request = PerturbationConfig {
            n: missing,
            seed: cfg.seed.wrapping_add(attempt as u64 * 0x9E37_79B9),
            ..cfg.clone()
        };
        let got = backend.perturb(text, &request)?;
        for candidate in got {
            if variants.len() == cfg.n {
                break;
            }
            if variant_is_valid(text, words.len(), &candidate) {
                variants.push(candidate);
            }
        }
    }
    if variants.len() < cfg.n {
        return Err(PerturbError::FillFailure {
            variant: variants.len(),
            reason: format!(
                "backend produced {} valid variant(s) of {} after {MAX_REDRAWS} retries",
                variants.len(),
                cfg.n
            ),
        });
    }
    Ok(variants)
}

/// A usable variant differs from the original and keeps the word count
/// within the drift bound.
fn variant_is_valid(original: &str, original_words: usize, candidate: &str) -> bool {
    if candidate == original {
        return false;
    }
    let wc = candidate.split_whitespace().count();
    if wc == 0 {
        return false;
    }
    let drift = (wc as f64 - original_words as f64).abs() / original_words as f64;
    drift <= MAX_WORD_COUNT_DRIFT
}

/// Picks `spans` non-overlapping span start positions inside `word_count`
/// words. Random placement retries a few times; dense requests fall back to
/// an aligned grid so the requested count is always honored.
pub(crate) fn select_spans(
    word_count: usize,
    spans: usize,
    span_length: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    for _ in 0..16 {
        if let Some(starts) = try_select(word_count, spans, span_length, rng) {
            return starts;
        }
    }
    // Aligned fallback: shuffle block starts 0, L, 2L, ... and keep `spans`.
    let mut blocks: Vec<usize> = (0..word_count / span_length)
        .map(|b| b * span_length)
        .collect();
    for i in (1..blocks.len()).rev() {
        let j = rng.gen_range(0..=i);
        blocks.swap(i, j);
    }
    let mut starts: Vec<usize> = blocks.into_iter().take(spans).collect();
    starts.sort_unstable();
    starts
}

fn try_select(
    word_count: usize,
    spans: usize,
    span_length: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    let mut starts: Vec<usize> = Vec::with_capacity(spans);
    'outer: for _ in 0..spans {
        for _ in 0..32 {
            let start = rng.gen_range(0..=word_count - span_length);
            let overlaps = starts
                .iter()
                .any(|&s| start < s + span_length && s < start + span_length);
            if !overlaps {
                starts.push(start);
                continue 'outer;
            }
        }
        return None;
    }
    starts.sort_unstable();
    Some(starts)
}

/// Frequency-ranked replacement lexicon for the `lexical_local` policy;
/// sampling is biased toward the head.
pub const LEXICON: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "was", "that", "for", "it", "with", "as", "his",
    "on", "be", "at", "by", "had", "not", "from", "this", "but", "they", "are", "her", "she",
    "which", "or", "an", "were", "we", "their", "been", "has", "will", "when", "who", "more",
    "no", "if", "out", "so", "up", "said", "what", "its", "about", "into", "than", "them", "can",
    "only", "other", "time", "new", "some", "could", "these", "two", "may", "then", "do", "first",
    "any", "my", "now", "such", "like", "our", "over", "man", "me", "even", "most", "made",
    "after", "also", "did", "many", "before", "must", "through", "years", "where", "much",
    "your", "way", "well", "down", "should", "because", "each", "just", "those", "people", "how",
    "too", "little", "good", "make", "world", "still", "own", "see", "men", "work", "long",
    "here", "get", "both", "between", "life", "being", "under", "never", "day", "same",
    "another", "know", "while", "last", "might", "us", "great", "old", "year", "off", "come",
    "since", "against", "go", "came", "right", "used", "take", "three", "states", "himself",
    "few", "house", "use", "during", "without", "again", "place", "around", "however", "home",
    "small", "found", "thought", "went", "say", "part", "once",
];

/// Head-biased draw from the lexicon (squared uniform index).
fn sample_lexicon(rng: &mut ChaCha8Rng) -> &'static str {
    let r: f64 = rng.gen();
    let idx = (r * r * LEXICON.len() as f64) as usize;
    LEXICON[idx.min(LEXICON.len() - 1)]
}

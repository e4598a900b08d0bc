//! Deterministic n-gram language model used as the desk-scale scoring oracle.
//!
//! The model is a whitespace-token n-gram with additive (Laplace) smoothing
//! and hard backoff: the predictive distribution at a position comes from the
//! longest context suffix that was observed during training, smoothed over
//! the full vocabulary. Every distribution therefore sums to exactly one and
//! every statistic can be recomputed by brute-force enumeration.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, DecodingConfig, DecodingStrategy};
use crate::error::BackendError;
use crate::stats::{position_stats, TextStats, TokenStats};

/// Begin-of-sequence marker; pads contexts so position 1 is scored against it.
pub const BOS: &str = "<s>";
/// End-of-sequence marker; terminates generation and closes corpus sentences.
pub const EOS: &str = "</s>";
/// Stand-in for out-of-vocabulary words at scoring time.
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
struct ContextCounts {
    total: u64,
    by_token: BTreeMap<u32, u64>,
}

/// Additive-smoothed n-gram model with backoff to lower orders.
///
/// Immutable after training and safe for unrestricted concurrent reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    order: usize,
    alpha: f64,
    /// Sorted vocabulary; the index of a token is its id.
    vocab: Vec<String>,
    /// Context (token ids, length 0..order) to continuation counts.
    counts: BTreeMap<Vec<u32>, ContextCounts>,
}

impl ToyModel {
    /// Trains on a corpus of whitespace-tokenized passages.
    ///
    /// Counts are gathered at every context length from 0 (unigram) up to
    /// `order - 1`; sequences are padded with `order - 1` begin markers and
    /// closed with one end marker. Training is deterministic: same corpus,
    /// order, and alpha produce byte-identical count tables.
    pub fn train(corpus: &[String], order: usize, alpha: f64) -> Result<ToyModel, BackendError> {
        if corpus.iter().all(|s| s.split_whitespace().next().is_none()) {
            return Err(BackendError::EmptyCorpus);
        }
        if order < 1 {
            return Err(BackendError::InvalidConfig {
                reason: format!("order {order} must be >= 1"),
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(BackendError::InvalidConfig {
                reason: format!("alpha {alpha} must be > 0"),
            });
        }

        let mut vocab: Vec<String> = corpus
            .iter()
            .flat_map(|s| s.split_whitespace())
            .map(str::to_owned)
            .chain([BOS.to_owned(), EOS.to_owned(), UNK.to_owned()])
            .collect();
        vocab.sort();
        vocab.dedup();

        let mut model = ToyModel {
            order,
            alpha,
            vocab,
            counts: BTreeMap::new(),
        };
        let bos = model.token_id(BOS);
        let eos = model.token_id(EOS);
        for passage in corpus {
            let mut ids: Vec<u32> = vec![bos; order - 1];
            ids.extend(passage.split_whitespace().map(|w| model.token_id(w)));
            ids.push(eos);
            for i in (order - 1)..ids.len() {
                for ctx_len in 0..order {
                    let ctx = ids[i - ctx_len..i].to_vec();
                    let entry = model.counts.entry(ctx).or_default();
                    entry.total += 1;
                    *entry.by_token.entry(ids[i]).or_insert(0) += 1;
                }
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Token id for a word, mapping out-of-vocabulary words to `<unk>`.
    pub fn token_id(&self, word: &str) -> u32 {
        match self.vocab.binary_search_by(|v| v.as_str().cmp(word)) {
            Ok(i) => i as u32,
            Err(_) => self
                .vocab
                .binary_search_by(|v| v.as_str().cmp(UNK))
                .expect("vocabulary always contains <unk>") as u32,
        }
    }

    pub fn token_text(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    /// Full predictive distribution after the given context words.
    ///
    /// Uses the longest observed context suffix (hard backoff); the empty
    /// context always exists, so the result always sums to 1 ± 1e-9.
    pub fn distribution(&self, context: &[&str]) -> Vec<f64> {
        let ids: Vec<u32> = context.iter().map(|w| self.token_id(w)).collect();
        self.distribution_ids(&ids)
    }

    fn distribution_ids(&self, context: &[u32]) -> Vec<f64> {
        let v = self.vocab.len();
        let max_ctx = (self.order - 1).min(context.len());
        for ctx_len in (0..=max_ctx).rev() {
            let ctx = &context[context.len() - ctx_len..];
            if let Some(entry) = self.counts.get(ctx) {
                let denom = entry.total as f64 + self.alpha * v as f64;
                let mut probs = vec![self.alpha / denom; v];
                for (&tok, &count) in &entry.by_token {
                    probs[tok as usize] = (count as f64 + self.alpha) / denom;
                }
                return probs;
            }
        }
        unreachable!("the empty context is always present after training")
    }

    /// Scores every position of `text`; requires at least two tokens.
    pub fn score(&self, text: &str) -> Result<Vec<TokenStats>, BackendError> {
        self.score_capped(text, usize::MAX).map(|(tokens, _)| tokens)
    }

    fn score_capped(
        &self,
        text: &str,
        cap: usize,
    ) -> Result<(Vec<TokenStats>, bool), BackendError> {
        let words: Vec<&str> = text.split_whitespace().collect();
        if words.len() < 2 {
            return Err(BackendError::TextTooShort {
                tokens: words.len(),
            });
        }
        let truncated = words.len() > cap;
        let scored = words.len().min(cap);
        let bos = self.token_id(BOS);
        let mut context: Vec<u32> = vec![bos; self.order - 1];
        let mut out = Vec::with_capacity(scored);
        for word in &words[..scored] {
            let id = self.token_id(word);
            let probs = self.distribution_ids(&context);
            let (log_prob, rank, entropy) = position_stats(&probs, id as usize);
            out.push(TokenStats {
                token_text: (*word).to_owned(),
                log_prob,
                rank,
                entropy,
            });
            context.push(id);
        }
        Ok((out, truncated))
    }

    /// Samples a continuation of up to `max_tokens` tokens; generation stops
    /// early when the end marker is drawn. Identical (prompt, cfg) inputs
    /// produce identical output.
    pub fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        cfg: &DecodingConfig,
    ) -> Result<String, BackendError> {
        cfg.validate()?;
        if prompt.split_whitespace().next().is_none() {
            return Err(BackendError::InvalidConfig {
                reason: "prompt must be non-empty".into(),
            });
        }
        if max_tokens < 1 {
            return Err(BackendError::InvalidConfig {
                reason: "max_tokens must be >= 1".into(),
            });
        }
        let bos = self.token_id(BOS);
        let eos = self.token_id(EOS);
        let mut context: Vec<u32> = vec![bos; self.order - 1];
        context.extend(prompt.split_whitespace().map(|w| self.token_id(w)));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut out: Vec<&str> = Vec::new();
        for _ in 0..max_tokens {
            let probs = self.distribution_ids(&context);
            let pick = select_token(&probs, cfg, &mut rng) as u32;
            if pick == eos {
                break;
            }
            out.push(self.token_text(pick));
            context.push(pick);
        }
        Ok(out.join(" "))
    }

    /// Writes the model as deterministic JSON (sorted tables).
    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &ToyModelFile::from(self)).map_err(|e| {
            BackendError::Protocol {
                reason: format!("serializing toy model: {e}"),
            }
        })?;
        use std::io::Write;
        writeln!(w)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ToyModel, BackendError> {
        let file = std::fs::File::open(path)?;
        let file: ToyModelFile =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| BackendError::Parse {
                line: e.line(),
                reason: format!("toy model file: {e}"),
            })?;
        file.into_model()
    }
}

/// On-disk form: BTreeMap keys become ordered arrays so the JSON stays
/// deterministic and readable.
#[derive(Serialize, Deserialize)]
struct ToyModelFile {
    order: usize,
    alpha: f64,
    vocab: Vec<String>,
    contexts: Vec<ContextEntry>,
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    ctx: Vec<u32>,
    total: u64,
    counts: Vec<(u32, u64)>,
}

impl From<&ToyModel> for ToyModelFile {
    fn from(m: &ToyModel) -> Self {
        ToyModelFile {
            order: m.order,
            alpha: m.alpha,
            vocab: m.vocab.clone(),
            contexts: m
                .counts
                .iter()
                .map(|(ctx, entry)| ContextEntry {
                    ctx: ctx.clone(),
                    total: entry.total,
                    counts: entry.by_token.iter().map(|(&t, &c)| (t, c)).collect(),
                })
                .collect(),
        }
    }
}

impl ToyModelFile {
    fn into_model(self) -> Result<ToyModel, BackendError> {
        if self.order < 1 || !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(BackendError::InvalidConfig {
                reason: "model file has invalid order or alpha".into(),
            });
        }
        let counts = self
            .contexts
            .into_iter()
            .map(|e| {
                (
                    e.ctx,
                    ContextCounts {
                        total: e.total,
                        by_token: e.counts.into_iter().collect(),
                    },
                )
            })
            .collect();
        Ok(ToyModel {
            order: self.order,
            alpha: self.alpha,
            vocab: self.vocab,
            counts,
        })
    }
}

/// Draws one token index from `probs` under the decoding config.
fn select_token(probs: &[f64], cfg: &DecodingConfig, rng: &mut ChaCha8Rng) -> usize {
    if cfg.greedy {
        return argmax(probs);
    }
    // Temperature rescaling applies to every strategy; T = 1 is the identity.
    let weights: Vec<f64> = if cfg.temperature == 1.0 {
        probs.to_vec()
    } else {
        probs.iter().map(|p| p.powf(1.0 / cfg.temperature)).collect()
    };
    match cfg.strategy {
        DecodingStrategy::Temperature => sample(&weights, rng),
        DecodingStrategy::TopK => {
            let k = cfg.k.expect("validated") as usize;
            let order = sorted_desc(&weights);
            let kept = &order[..k.min(order.len())];
            sample_subset(&weights, kept, rng)
        }
        DecodingStrategy::TopP => {
            let p = cfg.p.expect("validated");
            let order = sorted_desc(&weights);
            let total: f64 = weights.iter().sum();
            let mut cum = 0.0;
            let mut cut = order.len();
            for (i, &idx) in order.iter().enumerate() {
                cum += weights[idx] / total;
                if cum >= p {
                    cut = i + 1;
                    break;
                }
            }
            sample_subset(&weights, &order[..cut], rng)
        }
    }
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Indices sorted by weight descending; ties broken by index for determinism.
fn sorted_desc(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let indices: Vec<usize> = (0..weights.len()).collect();
    sample_subset(weights, &indices, rng)
}

fn sample_subset(weights: &[f64], subset: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = subset.iter().map(|&i| weights[i]).sum();
    let threshold = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &i in subset {
        acc += weights[i];
        if acc >= threshold {
            return i;
        }
    }
    *subset.last().expect("subset is never empty")
}

/// Scoring/generation backend wrapping a [`ToyModel`] with a scored-length cap.
pub struct ToyBackend {
    model: ToyModel,
    max_scored_tokens: usize,
}

/// Default cap on scored positions per passage.
pub const DEFAULT_MAX_SCORED_TOKENS: usize = 512;

impl ToyBackend {
    pub fn new(model: ToyModel) -> ToyBackend {
        ToyBackend {
            model,
            max_scored_tokens: DEFAULT_MAX_SCORED_TOKENS,
        }
    }

    pub fn with_max_scored_tokens(mut self, cap: usize) -> ToyBackend {
        self.max_scored_tokens = cap.max(2);
        self
    }

    pub fn model(&self) -> &ToyModel {
        &self.model
    }
}

impl Backend for ToyBackend {
    fn id(&self) -> String {
        format!("toy:{}gram:a{}", self.model.order, self.model.alpha)
    }

    fn score_text(&self, text: &str) -> Result<TextStats, BackendError> {
        let (tokens, truncated) = self.model.score_capped(text, self.max_scored_tokens)?;
        Ok(TextStats {
            id: String::new(),
            backend_id: self.id(),
            vocab_size: self.model.vocab_size(),
            scored_from: 1,
            truncated,
            tokens,
        })
    }

    fn generate(
        &self,
        prompt: &str,
        max_tokens: usize,
        cfg: &DecodingConfig,
    ) -> Result<String, BackendError> {
        self.model.generate(prompt, max_tokens, cfg)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<String>, BackendError> {
        Ok(text.split_whitespace().map(str::to_owned).collect())
    }

    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<String> {
        lines.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_computed_bigram_probability() {
        // corpus "a b a b", order 2: padded sequence <s> a b a b </s>.
        // count(a -> b) = 2, count(a -> *) = 2, V = {a, b, <s>, </s>, <unk>} = 5,
        // so P(b | a) = (2 + alpha) / (2 + alpha * V).
        let alpha = 1.0;
        let m = ToyModel::train(&corpus(&["a b a b"]), 2, alpha).unwrap();
        assert_eq!(m.vocab_size(), 5);
        let dist = m.distribution(&["a"]);
        let p_b = dist[m.token_id("b") as usize];
        let expected = (2.0 + alpha) / (2.0 + alpha * 5.0);
        assert!((p_b - expected).abs() < 1e-15);
        // smoothing gives every unseen continuation alpha / (2 + alpha * V)
        let p_unk = dist[m.token_id(UNK) as usize];
        assert!((p_unk - alpha / (2.0 + alpha * 5.0)).abs() < 1e-15);
    }

    #[test]
    fn unigram_model_ignores_context() {
        let m = ToyModel::train(&corpus(&["a b a b"]), 1, 0.5).unwrap();
        let d1 = m.distribution(&[]);
        let d2 = m.distribution(&["a"]);
        let d3 = m.distribution(&["b", "a"]);
        assert_eq!(d1, d2);
        assert_eq!(d1, d3);
    }

    #[test]
    fn distributions_sum_to_one_at_every_backoff_level() {
        let m = ToyModel::train(
            &corpus(&["the cat sat on the mat", "the dog sat on the rug"]),
            3,
            0.25,
        )
        .unwrap();
        for ctx in [
            vec![],
            vec!["the"],
            vec!["the", "cat"],
            vec!["never", "seen"], // forces backoff to unigram
            vec!["on", "the"],
        ] {
            let sum: f64 = m.distribution(&ctx).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "context {ctx:?} sums to {sum}");
        }
    }

    #[test]
    fn hand_computed_trigram_scores() {
        // order 2 on two sentences; every value below is derived from the
        // count tables by hand, not from the implementation.
        let m = ToyModel::train(&corpus(&["the cat sat", "the dog sat"]), 2, 1.0).unwrap();
        // vocab: the, cat, sat, dog, <s>, </s>, <unk> -> V = 7
        assert_eq!(m.vocab_size(), 7);
        let stats = m.score("the cat sat").unwrap();
        // P(the | <s>) = (2+1)/(2+7) = 1/3; rank 1; entropy of [3/9, 1/9 x 6]
        assert!((stats[0].log_prob - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        assert_eq!(stats[0].rank, 1);
        let ent0 = -((3.0f64 / 9.0) * (3.0f64 / 9.0).ln() + 6.0 * (1.0 / 9.0) * (1.0f64 / 9.0).ln());
        assert!((stats[0].entropy - ent0).abs() < 1e-12);
        // P(cat | the) = (1+1)/(2+7) = 2/9, tied with dog at rank 1
        assert!((stats[1].log_prob - (2.0f64 / 9.0).ln()).abs() < 1e-12);
        assert_eq!(stats[1].rank, 1);
        // P(sat | cat) = (1+1)/(1+7) = 1/4
        assert!((stats[2].log_prob - 0.25f64.ln()).abs() < 1e-12);
        assert_eq!(stats[2].rank, 1);
    }

    #[test]
    fn score_rejects_short_text() {
        let m = ToyModel::train(&corpus(&["a b c"]), 2, 1.0).unwrap();
        assert!(matches!(
            m.score("a"),
            Err(BackendError::TextTooShort { tokens: 1 })
        ));
        assert!(matches!(
            m.score("   "),
            Err(BackendError::TextTooShort { tokens: 0 })
        ));
    }

    #[test]
    fn oov_words_map_to_unk() {
        let m = ToyModel::train(&corpus(&["a b c"]), 2, 1.0).unwrap();
        assert_eq!(m.token_text(m.token_id("zebra")), UNK);
        let stats = m.score("a zebra").unwrap();
        assert_eq!(stats[1].token_text, "zebra"); // original word kept as provenance
    }

    #[test]
    fn training_is_deterministic_and_serialization_round_trips() {
        let c = corpus(&["the cat sat on the mat", "a dog sat by the door"]);
        let m1 = ToyModel::train(&c, 3, 0.5).unwrap();
        let m2 = ToyModel::train(&c, 3, 0.5).unwrap();
        assert_eq!(m1, m2);
        let file1 = serde_json::to_string(&ToyModelFile::from(&m1)).unwrap();
        let file2 = serde_json::to_string(&ToyModelFile::from(&m2)).unwrap();
        assert_eq!(file1, file2, "count tables serialize byte-identically");
        let reloaded: ToyModelFile = serde_json::from_str(&file1).unwrap();
        assert_eq!(reloaded.into_model().unwrap(), m1);
    }

    #[test]
    fn greedy_generation_is_reproducible_and_rank_one() {
        let c = corpus(&[
            "the cat sat on the mat and the cat slept",
            "the dog sat on the rug and the dog slept",
        ]);
        let m = ToyModel::train(&c, 3, 0.1).unwrap();
        let cfg = DecodingConfig::greedy(7);
        let g1 = m.generate("the cat", 8, &cfg).unwrap();
        let g2 = m.generate("the cat", 8, &cfg).unwrap();
        assert_eq!(g1, g2);
        assert!(!g1.is_empty());
        // scoring prompt + continuation: every generated position has rank 1
        let full = format!("the cat {g1}");
        let stats = m.score(&full).unwrap();
        for tok in &stats[2..] {
            assert_eq!(tok.rank, 1, "greedy pick {:?} must be the argmax", tok.token_text);
        }
    }

    #[test]
    fn temperature_sampling_is_seed_deterministic() {
        let c = corpus(&["a b c a b d a b e"]);
        let m = ToyModel::train(&c, 2, 0.5).unwrap();
        let cfg = DecodingConfig::temperature(1.0, 99);
        assert_eq!(
            m.generate("a", 20, &cfg).unwrap(),
            m.generate("a", 20, &cfg).unwrap()
        );
        let other = m.generate("a", 20, &cfg.clone().with_seed(100)).unwrap();
        // different seed may coincide on tiny vocabularies, but usually not
        let same = m.generate("a", 20, &cfg).unwrap();
        assert!(other != same || other.len() <= 3);
    }

    #[test]
    fn top_k_samples_stay_in_the_top_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probs = [0.4, 0.3, 0.15, 0.1, 0.05];
        let cfg = DecodingConfig::top_k(2, 0);
        for _ in 0..200 {
            let pick = select_token(&probs, &cfg, &mut rng);
            assert!(pick < 2, "k=2 must restrict to the two most likely tokens");
        }
    }

    #[test]
    fn top_p_samples_stay_in_the_nucleus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probs = [0.5, 0.3, 0.1, 0.06, 0.04];
        // p = 0.75: smallest prefix with cumulative mass >= 0.75 is {0, 1}
        let cfg = DecodingConfig::top_p(0.75, 0);
        for _ in 0..200 {
            let pick = select_token(&probs, &cfg, &mut rng);
            assert!(pick < 2, "nucleus for p=0.75 is the first two tokens");
        }
    }

    #[test]
    fn toy_backend_caps_scored_positions() {
        let m = ToyModel::train(&corpus(&["a b c d e f g h"]), 2, 1.0).unwrap();
        let b = ToyBackend::new(m).with_max_scored_tokens(4);
        let stats = b.score_text("a b c d e f g h").unwrap();
        assert_eq!(stats.len(), 4);
        assert!(stats.truncated);
        assert!(stats.validate().is_ok());
    }
}

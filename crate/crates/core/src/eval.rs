//! Evaluation: AUROC, benchmark orchestration over paired datasets, and the
//! runtime cost model.
//!
//! AUROC is computed as the rank-sum statistic with midrank tie handling,
//! which is exactly the probability that a random machine score exceeds a
//! random human score, counting ties as one half. No curve is traced and no
//! threshold is chosen.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, DecodingConfig};
use crate::datagen::PairedSample;
use crate::detect::{score_with, Method};
use crate::error::EvalError;
use crate::perturb::{perturb, PerturbationConfig};
use crate::stats::TextStats;

/// Probability that a machine score ranks above a human score, ties at half.
///
/// `auroc(m, h) = [#{m > h} + 0.5 #{m = h}] / (|m| |h|)`, computed via the
/// rank sum in O((m+h) log(m+h)). Degenerate sentinel values are ordinary
/// finite scores here.
pub fn auroc(machine: &[f64], human: &[f64]) -> Result<f64, EvalError> {
    if machine.is_empty() {
        return Err(EvalError::EmptyScoreList { which: "machine" });
    }
    if human.is_empty() {
        return Err(EvalError::EmptyScoreList { which: "human" });
    }
    if machine.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteScore { which: "machine" });
    }
    if human.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteScore { which: "human" });
    }

    let mut combined: Vec<(f64, bool)> = machine
        .iter()
        .map(|&v| (v, true))
        .chain(human.iter().map(|&v| (v, false)))
        .collect();
    combined.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    // Midranks: every member of a tie group gets the group's average rank.
    let mut rank_sum_machine = 0.0;
    let mut i = 0;
    while i < combined.len() {
        let mut j = i;
        while j < combined.len() && combined[j].0 == combined[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for item in &combined[i..j] {
            if item.1 {
                rank_sum_machine += midrank;
            }
        }
        i = j;
    }

    let m = machine.len() as f64;
    let h = human.len() as f64;
    let u = rank_sum_machine - m * (m + 1.0) / 2.0;
    Ok(u / (m * h))
}

/// Runtime cost model: `t_p` seconds per perturbation, `t_m` seconds per
/// simple-statistic evaluation, `n` perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub t_p: f64,
    pub t_m: f64,
    pub n: usize,
}

impl CostModel {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.t_p.is_finite() && self.t_p > 0.0) {
            return Err(EvalError::InvalidCostModel {
                reason: format!("t_p {} must be > 0", self.t_p),
            });
        }
        if !(self.t_m.is_finite() && self.t_m > 0.0) {
            return Err(EvalError::InvalidCostModel {
                reason: format!("t_m {} must be > 0", self.t_m),
            });
        }
        Ok(())
    }
}

/// Estimated per-sample runtime in seconds.
///
/// Simple statistics cost one model pass (`t_m`); LRR requests both the
/// log-likelihood and log-rank statistics (`2 t_m`); perturbation-based
/// methods pay `n t_p + (n+1) t_m`.
pub fn estimate_cost(method: Method, cm: &CostModel) -> f64 {
    match method {
        Method::LogP | Method::Rank | Method::LogRank | Method::Entropy => cm.t_m,
        Method::Lrr => 2.0 * cm.t_m,
        Method::DetectGpt | Method::Npr => cm.n as f64 * cm.t_p + (cm.n as f64 + 1.0) * cm.t_m,
    }
}

/// Picks between LRR and NPR from a validation report computed at n = 10:
/// LRR wins ties because it is ~50x cheaper.
pub fn recommend_method(report: &BenchmarkReport) -> Result<Method, EvalError> {
    let get = |m: Method| {
        report
            .auroc
            .get(&m)
            .copied()
            .ok_or_else(|| EvalError::MissingMethod {
                method: m.to_string(),
            })
    };
    let lrr = get(Method::Lrr)?;
    let npr = get(Method::Npr)?;
    Ok(if lrr >= npr { Method::Lrr } else { Method::Npr })
}

/// Which side of a pair a score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextLabel {
    Machine,
    Human,
}

impl std::fmt::Display for TextLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TextLabel::Machine => write!(f, "machine"),
            TextLabel::Human => write!(f, "human"),
        }
    }
}

/// One raw detector score, as logged to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub label: TextLabel,
    pub method: Method,
    pub score: f64,
    pub degenerate: bool,
}

/// Benchmark options beyond the dataset itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub dataset_id: String,
    pub methods: Vec<Method>,
    /// Required when any requested method needs perturbations; the set is
    /// generated once per text and shared by DetectGPT and NPR.
    pub perturbation: Option<PerturbationConfig>,
    /// Include the shared prompt positions in the statistics. Off by
    /// default: both sides of a pair start with the same prompt, so scoring
    /// it adds no signal.
    pub score_prompt: bool,
    pub normalize_detect_gpt: bool,
    /// Record measured per-method wall-clock in the report. Off by default
    /// so that identical runs produce byte-identical reports.
    pub measure_timing: bool,
}

impl BenchmarkConfig {
    pub fn new(dataset_id: impl Into<String>, methods: impl IntoIterator<Item = Method>) -> Self {
        let mut methods: Vec<Method> = methods.into_iter().collect();
        methods.sort();
        methods.dedup();
        BenchmarkConfig {
            dataset_id: dataset_id.into(),
            methods,
            perturbation: None,
            score_prompt: false,
            normalize_detect_gpt: false,
            measure_timing: false,
        }
    }

    pub fn with_perturbation(mut self, cfg: PerturbationConfig) -> Self {
        self.perturbation = Some(cfg);
        self
    }

    fn validate(&self) -> Result<(), EvalError> {
        for m in &self.methods {
            if m.requires_perturbations() && self.perturbation.is_none() {
                return Err(EvalError::PerturbationConfigRequired {
                    method: m.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Sample accounting: failed pairs are dropped on both sides to keep the
/// pairing balanced, and counted here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub total: usize,
    pub used: usize,
    pub failed: usize,
}

/// Everything the benchmark reports: per-method AUROC, the config snapshot,
/// sample accounting, optional measured wall-clock, and the cheap-vs-accurate
/// advisory when both LRR and NPR were run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset_id: String,
    pub backend_id: String,
    pub auroc: BTreeMap<Method, f64>,
    pub config: ReportConfig,
    pub samples: SampleCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<BTreeMap<Method, f64>>,
    /// Which of LRR / NPR the decision rule recommends (ties favor LRR, the
    /// cheaper method). Meaningful when the report was computed at n = 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisory: Option<Method>,
}

/// Config snapshot embedded in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoding: Option<DecodingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
    pub score_prompt: bool,
    pub normalize_detect_gpt: bool,
}

impl BenchmarkReport {
    /// Canonical JSON rendering; byte-identical for identical runs.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text table, methods grouped without/with perturbation.
    pub fn to_table_string(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset: {}    backend: {}    pairs used: {} (failed: {})",
            self.dataset_id, self.backend_id, self.samples.used, self.samples.failed
        );
        if let Some(p) = &self.config.perturbation {
            let _ = writeln!(
                out,
                "perturbations: n={} policy={} mask_fraction={} span_length={}",
                p.n, p.policy, p.mask_fraction, p.span_length
            );
        }
        let timing = self.wall_clock_seconds.as_ref();
        let _ = writeln!(out);
        let _ = match timing {
            Some(_) => writeln!(out, "{:<14}{:<12}{:>8}  {:>10}", "perturbation", "method", "auroc", "seconds"),
            None => writeln!(out, "{:<14}{:<12}{:>8}", "perturbation", "method", "auroc"),
        };
        for (method, value) in &self.auroc {
            let group = if method.requires_perturbations() { "w/" } else { "w/o" };
            match timing.and_then(|t| t.get(method)) {
                Some(secs) => {
                    let _ = writeln!(
                        out,
                        "{:<14}{:<12}{:>8.4}  {:>10.3}",
                        group, method.to_string(), value, secs
                    );
                }
                None => {
                    let _ = writeln!(out, "{:<14}{:<12}{:>8.4}", group, method.to_string(), value);
                }
            }
        }
        if let Some(advisory) = self.advisory {
            let _ = writeln!(out);
            let _ = writeln!(out, "advisory: prefer {advisory}");
        }
        out
    }
}

/// The report plus the raw score vectors it was computed from.
#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub report: BenchmarkReport,
    pub raw_scores: Vec<ScoreRecord>,
    /// One message per dropped pair.
    pub failures: Vec<String>,
}

impl BenchmarkOutcome {
    /// Raw scores as CSV (`sample_id,label,method,score,degenerate`).
    pub fn scores_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.raw_scores {
            w.serialize(r).map_err(|e| EvalError::InvalidCostModel {
                reason: format!("csv: {e}"),
            })?;
        }
        let bytes = w.into_inner().expect("vec writer never fails");
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

struct SampleScores {
    sample_id: String,
    scores: Vec<(Method, TextLabel, f64, bool)>,
    timing: BTreeMap<Method, f64>,
}

/// Scores every pair with every requested method and aggregates AUROCs.
///
/// Per-sample work fans out to the rayon pool unless the backend declares
/// itself single-session. Perturbation seeds derive from the pair index, so
/// results do not depend on scheduling.
pub fn run_benchmark(
    pairs: &[PairedSample],
    backend: &dyn Backend,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkOutcome, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    cfg.validate()?;

    let work = |(idx, pair): (usize, &PairedSample)| score_sample(idx, pair, backend, cfg);
    let results: Vec<Result<SampleScores, String>> = if backend.supports_concurrency() {
        pairs.par_iter().enumerate().map(work).collect()
    } else {
        pairs.iter().enumerate().map(work).collect()
    };

    let total = pairs.len();
    let mut raw_scores = Vec::new();
    let mut timing: BTreeMap<Method, f64> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut used = 0;
    for result in results {
        match result {
            Ok(sample) => {
                used += 1;
                for (method, label, value, degenerate) in sample.scores {
                    raw_scores.push(ScoreRecord {
                        sample_id: sample.sample_id.clone(),
                        label,
                        method,
                        score: value,
                        degenerate,
                    });
                }
                for (m, secs) in sample.timing {
                    *timing.entry(m).or_insert(0.0) += secs;
                }
            }
            Err(message) => failures.push(message),
        }
    }
    let failed = total - used;
    if used == 0 {
        return Err(EvalError::NoUsableSamples { failed, total });
    }

    let mut auroc_map = BTreeMap::new();
    for &method in &cfg.methods {
        let machine: Vec<f64> = raw_scores
            .iter()
            .filter(|r| r.method == method && r.label == TextLabel::Machine)
            .map(|r| r.score)
            .collect();
        let human: Vec<f64> = raw_scores
            .iter()
            .filter(|r| r.method == method && r.label == TextLabel::Human)
            .map(|r| r.score)
            .collect();
        auroc_map.insert(method, auroc(&machine, &human)?);
    }

    let mut report = BenchmarkReport {
        dataset_id: cfg.dataset_id.clone(),
        backend_id: backend.id(),
        auroc: auroc_map,
        config: ReportConfig {
            methods: cfg.methods.clone(),
            decoding: pairs.first().map(|p| p.decoding.clone()),
            perturbation: cfg.perturbation.clone(),
            score_prompt: cfg.score_prompt,
            normalize_detect_gpt: cfg.normalize_detect_gpt,
        },
        samples: SampleCounts {
            total,
            used,
            failed,
        },
        wall_clock_seconds: cfg.measure_timing.then_some(timing),
        advisory: None,
    };
    report.advisory = recommend_method(&report).ok();
    Ok(BenchmarkOutcome {
        report,
        raw_scores,
        failures,
    })
}

fn score_sample(
    idx: usize,
    pair: &PairedSample,
    backend: &dyn Backend,
    cfg: &BenchmarkConfig,
) -> Result<SampleScores, String> {
    let err = |e: String| -> String { format!("sample {}: {e}", pair.id) };
    let prompt_len = if cfg.score_prompt {
        0
    } else {
        backend
            .tokenize(&pair.prompt)
            .map_err(|e| err(e.to_string()))?
            .len()
    };

    let mut timing: BTreeMap<Method, f64> = BTreeMap::new();
    let scored = |text: &str, suffix: &str| -> Result<TextStats, String> {
        let mut stats = backend.score_text(text).map_err(|e| err(e.to_string()))?;
        stats.id = format!("{}/{suffix}", pair.id);
        stats
            .without_prompt(prompt_len)
            .ok_or_else(|| err("no scored positions after the prompt".into()))
    };

    let simple_start = Instant::now();
    let human = scored(&pair.human_text, "human")?;
    let machine = scored(&pair.machine_text, "machine")?;
    let scoring_secs = simple_start.elapsed().as_secs_f64();

    let needs_perturbation = cfg.methods.iter().any(Method::requires_perturbations);
    let perturbed = if needs_perturbation {
        let base = cfg.perturbation.as_ref().expect("validated");
        let pert_start = Instant::now();
        // One perturbation set per text, shared across DetectGPT and NPR;
        // the seed is salted per pair index so parallel order cannot matter.
        let mut scored_variants = Vec::with_capacity(2);
        for (text, suffix) in [(&pair.machine_text, "machine"), (&pair.human_text, "human")] {
            let pert_cfg = PerturbationConfig {
                seed: derive_seed(base.seed, idx as u64, 0),
                ..base.clone()
            };
            let set = perturb(text, &pert_cfg, Some(backend)).map_err(|e| err(e.to_string()))?;
            let variants: Result<Vec<TextStats>, String> = set
                .variants
                .iter()
                .enumerate()
                .map(|(v, variant)| scored(variant, &format!("{suffix}/p{v}")))
                .collect();
            scored_variants.push(variants?);
        }
        let secs = pert_start.elapsed().as_secs_f64();
        for m in [Method::DetectGpt, Method::Npr] {
            if cfg.methods.contains(&m) {
                *timing.entry(m).or_insert(0.0) += secs;
            }
        }
        Some((scored_variants.swap_remove(0), scored_variants.swap_remove(0)))
    } else {
        None
    };
    let (machine_perturbed, human_perturbed) = match &perturbed {
        Some((m, h)) => (Some(m.as_slice()), Some(h.as_slice())),
        None => (None, None),
    };

    let mut scores = Vec::with_capacity(cfg.methods.len() * 2);
    for &method in &cfg.methods {
        let detect_start = Instant::now();
        for (stats, pert, label) in [
            (&machine, machine_perturbed, TextLabel::Machine),
            (&human, human_perturbed, TextLabel::Human),
        ] {
            let score = score_with(method, stats, pert, cfg.normalize_detect_gpt)
                .map_err(|e| err(format!("{method}: {e}")))?;
            scores.push((method, label, score.value, score.degenerate));
        }
        *timing.entry(method).or_insert(0.0) +=
            detect_start.elapsed().as_secs_f64() + scoring_secs;
    }

    Ok(SampleScores {
        sample_id: pair.id.clone(),
        scores,
        timing,
    })
}

/// Splitmix64-style seed derivation, stable across platforms.
pub(crate) fn derive_seed(base: u64, stream: u64, attempt: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(attempt.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_auroc(machine: &[f64], human: &[f64]) -> f64 {
        let mut wins = 0.0;
        for &m in machine {
            for &h in human {
                if m > h {
                    wins += 1.0;
                } else if m == h {
                    wins += 0.5;
                }
            }
        }
        wins / (machine.len() * human.len()) as f64
    }

    #[test]
    fn perfect_separation_is_one() {
        assert_eq!(auroc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn identical_multisets_are_half() {
        let xs = [0.3, 0.7, 0.7, 1.1];
        assert_eq!(auroc(&xs, &xs).unwrap(), 0.5);
    }

    #[test]
    fn pairwise_counting_example() {
        // pairs: (0.9 > 0.5), (0.9 > 0.1), (0.4 < 0.5), (0.4 > 0.1) -> 3/4
        assert_eq!(auroc(&[0.9, 0.4], &[0.5, 0.1]).unwrap(), 0.75);
    }

    #[test]
    fn empty_and_non_finite_inputs_error() {
        assert!(matches!(
            auroc(&[], &[1.0]),
            Err(EvalError::EmptyScoreList { which: "machine" })
        ));
        assert!(matches!(
            auroc(&[1.0], &[]),
            Err(EvalError::EmptyScoreList { which: "human" })
        ));
        assert!(matches!(
            auroc(&[f64::NAN], &[1.0]),
            Err(EvalError::NonFiniteScore { which: "machine" })
        ));
    }

    #[test]
    fn degenerate_sentinels_are_ranked_normally() {
        let v = auroc(&[crate::detect::DEGENERATE_MAX, 1.0], &[0.5, 2.0]).unwrap();
        assert_eq!(v, 0.75);
    }

    #[test]
    fn cost_formula_examples() {
        let cm = CostModel { t_p: 0.10, t_m: 0.06, n: 50 };
        let detect = estimate_cost(Method::DetectGpt, &cm);
        assert!((detect - 8.06).abs() < 1e-9);
        assert!((estimate_cost(Method::Lrr, &cm) - 0.12).abs() == 0.0);
        assert_eq!(estimate_cost(Method::LogP, &cm), 0.06);
        // n = 0 collapses the perturbation formula to t_m
        let cm0 = CostModel { t_p: 0.10, t_m: 0.06, n: 0 };
        assert_eq!(estimate_cost(Method::Npr, &cm0), 0.06);
    }

    #[test]
    fn recommendation_rule_prefers_lrr_on_ties() {
        let mut report = BenchmarkReport {
            dataset_id: "d".into(),
            backend_id: "b".into(),
            auroc: BTreeMap::new(),
            config: ReportConfig {
                methods: vec![Method::Lrr, Method::Npr],
                decoding: None,
                perturbation: None,
                score_prompt: false,
                normalize_detect_gpt: false,
            },
            samples: SampleCounts { total: 0, used: 0, failed: 0 },
            wall_clock_seconds: None,
            advisory: None,
        };
        report.auroc.insert(Method::Lrr, 0.91);
        report.auroc.insert(Method::Npr, 0.89);
        assert_eq!(recommend_method(&report).unwrap(), Method::Lrr);
        report.auroc.insert(Method::Npr, 0.93);
        report.auroc.insert(Method::Lrr, 0.85);
        assert_eq!(recommend_method(&report).unwrap(), Method::Npr);
        let tie = 0.9;
        report.auroc.insert(Method::Lrr, tie);
        report.auroc.insert(Method::Npr, tie);
        assert_eq!(recommend_method(&report).unwrap(), Method::Lrr);
        report.auroc.remove(&Method::Npr);
        assert!(matches!(
            recommend_method(&report),
            Err(EvalError::MissingMethod { .. })
        ));
    }

    proptest! {
        #[test]
        fn rank_sum_matches_brute_force(
            machine in proptest::collection::vec(-50.0f64..50.0, 1..50),
            human in proptest::collection::vec(-50.0f64..50.0, 1..50),
        ) {
            let fast = auroc(&machine, &human).unwrap();
            let slow = brute_force_auroc(&machine, &human);
            prop_assert!((fast - slow).abs() <= 1e-12);
        }

        #[test]
        fn complement_identity_holds(
            machine in proptest::collection::vec(-10.0f64..10.0, 1..30),
            human in proptest::collection::vec(-10.0f64..10.0, 1..30),
        ) {
            let a = auroc(&machine, &human).unwrap();
            let b = auroc(&human, &machine).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn invariant_under_increasing_transforms(
            machine in proptest::collection::vec(-50.0f64..50.0, 1..30),
            human in proptest::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let base = auroc(&machine, &human).unwrap();
            let apply = |f: fn(f64) -> f64, xs: &[f64]| xs.iter().map(|&x| f(x)).collect::<Vec<_>>();
            for f in [|x: f64| 3.0 * x + 7.0, |x: f64| x.exp(), |x: f64| x * x * x] {
                let t = auroc(&apply(f, &machine), &apply(f, &human)).unwrap();
                prop_assert!((base - t).abs() <= 1e-12);
            }
        }

        #[test]
        fn estimate_cost_is_monotone(
            t_p in 0.01f64..1.0,
            t_m in 0.01f64..1.0,
            n in 0usize..200,
            dt in 0.0f64..0.5,
            dn in 0usize..50,
        ) {
            for method in Method::ALL {
                let base = estimate_cost(method, &CostModel { t_p, t_m, n });
                let bump_tp = estimate_cost(method, &CostModel { t_p: t_p + dt, t_m, n });
                let bump_tm = estimate_cost(method, &CostModel { t_p, t_m: t_m + dt, n });
                let bump_n = estimate_cost(method, &CostModel { t_p, t_m, n: n + dn });
                prop_assert!(bump_tp >= base);
                prop_assert!(bump_tm >= base);
                prop_assert!(bump_n >= base);
            }
        }
    }
}

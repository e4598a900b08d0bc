//! Command implementations.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use detectllm::backend::{
    load_offline_stats, write_stats_jsonl, Backend, DecodingConfig, DecodingStrategy, HttpBackend,
    ToyBackend, ToyModel,
};
use detectllm::datagen::{build_pairs, read_pairs_jsonl, write_pairs_jsonl, DatagenConfig};
use detectllm::detect::{score_with, DetectorScore, Method};
use detectllm::eval::{estimate_cost, run_benchmark, BenchmarkConfig, CostModel};
use detectllm::perturb::{perturb as perturb_text, PerturbationConfig, PerturbationPolicy};
use detectllm::stats::TextStats;
use serde_json::json;

use crate::errors::CliError;
use crate::{
    BackendArgs, BackendKind, BenchmarkArgs, CostArgs, GenDatasetArgs, PerturbArgs,
    PerturbationArgs, SampleCorpusArgs, ScoreArgs, TrainToyArgs,
};

fn read_input(input: &Option<PathBuf>) -> Result<String, CliError> {
    let text = match input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    if text.trim().is_empty() {
        return Err(CliError::usage(
            "input text is empty (pass --input FILE or pipe text on stdin)",
        ));
    }
    Ok(text)
}

fn read_corpus(path: &Path) -> Result<Vec<String>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
    Ok(raw
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

fn parse_method(name: &str) -> Result<Method, CliError> {
    name.parse().map_err(CliError::Usage)
}

fn parse_policy(name: &str) -> Result<PerturbationPolicy, CliError> {
    match name {
        "lexical_local" => Ok(PerturbationPolicy::LexicalLocal),
        "mask_fill_backend" => Ok(PerturbationPolicy::MaskFillBackend),
        other => Err(CliError::usage(format!(
            "unknown perturbation policy {other:?}; expected lexical_local or mask_fill_backend"
        ))),
    }
}

impl PerturbationArgs {
    fn to_config(&self, seed: u64, default_n: Option<usize>) -> Result<Option<PerturbationConfig>, CliError> {
        let n = match self.perturbations.or(default_n) {
            Some(n) => n,
            None => return Ok(None),
        };
        let cfg = PerturbationConfig {
            n,
            mask_fraction: self.mask_fraction,
            span_length: self.span_length,
            policy: parse_policy(&self.policy)?,
            seed,
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }
}

/// Builds a live scoring backend; the offline kind is handled per command.
fn live_backend(args: &BackendArgs) -> Result<Box<dyn Backend>, CliError> {
    match args.backend {
        BackendKind::Toy => {
            let model = match (&args.model_file, &args.train_corpus) {
                (Some(path), _) => ToyModel::load(path)?,
                (None, Some(corpus)) => {
                    ToyModel::train(&read_corpus(corpus)?, args.order, args.alpha)?
                }
                (None, None) => {
                    return Err(CliError::usage(
                        "toy backend needs --model-file FILE or --train-corpus FILE",
                    ))
                }
            };
            Ok(Box::new(ToyBackend::new(model)))
        }
        BackendKind::Http => {
            let backend = match &args.url {
                Some(url) => HttpBackend::new(url)?,
                None => HttpBackend::from_env()?,
            };
            Ok(Box::new(backend))
        }
        BackendKind::Offline => Err(CliError::usage(
            "this operation needs a scoring backend; pass --backend toy or --backend http",
        )),
    }
}

fn print_score(score: &DetectorScore) {
    println!(
        "{}",
        json!({
            "method": score.method,
            "score": score.value,
            "degenerate": score.degenerate,
            "n_perturbations": score.n_perturbations_used,
        })
    );
}

pub fn score(args: ScoreArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    if args.backend.backend == BackendKind::Offline {
        return score_offline(&args, method);
    }

    let backend = live_backend(&args.backend)?;
    let text = read_input(&args.input)?;
    let mut stats = backend.score_text(text.trim())?;
    stats.id = args
        .input
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stdin".into());

    let perturbed = if method.requires_perturbations() {
        let cfg = args
            .perturbation
            .to_config(args.seed, None)?
            .ok_or_else(|| {
                CliError::usage(format!(
                    "method {method} needs a perturbation source: pass --perturbations N \
                     (and optionally --policy/--mask-fraction/--span-length)"
                ))
            })?;
        let set = perturb_text(text.trim(), &cfg, Some(backend.as_ref()))?;
        let mut variant_stats = Vec::with_capacity(set.variants.len());
        for variant in &set.variants {
            let mut vs = backend.score_text(variant)?;
            vs.id = stats.id.clone();
            variant_stats.push(vs);
        }
        Some(variant_stats)
    } else {
        None
    };

    if let Some(path) = &args.emit_stats {
        write_stats_jsonl(path, std::slice::from_ref(&stats))?;
    }
    if let Some(path) = &args.emit_perturbed_stats {
        let variants = perturbed.as_deref().ok_or_else(|| {
            CliError::usage("--emit-perturbed-stats requires a perturbation-based method")
        })?;
        write_stats_jsonl(path, variants)?;
    }

    let score = score_with(method, &stats, perturbed.as_deref(), args.normalize)?;
    print_score(&score);
    Ok(())
}

fn score_offline(args: &ScoreArgs, method: Method) -> Result<(), CliError> {
    let stats_path = args.backend.stats.as_ref().ok_or_else(|| {
        CliError::usage("offline backend needs --stats FILE (stats-JSONL records)")
    })?;
    let records = load_offline_stats(stats_path)?;
    if records.is_empty() {
        return Err(CliError::usage(format!(
            "{} contains no stats records",
            stats_path.display()
        )));
    }

    let perturbed_by_id: Option<BTreeMap<String, Vec<TextStats>>> = if method
        .requires_perturbations()
    {
        let path = args.perturbed_stats.as_ref().ok_or_else(|| {
            CliError::usage(format!(
                "method {method} in offline mode needs pre-perturbed stats: pass \
                 --perturbed-stats FILE whose records share the original record's id \
                 (the offline backend cannot perturb or re-score text)"
            ))
        })?;
        let mut grouped: BTreeMap<String, Vec<TextStats>> = BTreeMap::new();
        for record in load_offline_stats(path)? {
            grouped.entry(record.id.clone()).or_default().push(record);
        }
        Some(grouped)
    } else {
        None
    };

    for record in &records {
        let perturbed = match &perturbed_by_id {
            Some(grouped) => Some(grouped.get(&record.id).map(Vec::as_slice).ok_or_else(
                || {
                    CliError::usage(format!(
                        "no perturbed records with id {:?} in the --perturbed-stats file",
                        record.id
                    ))
                },
            )?),
            None => None,
        };
        let score = score_with(method, record, perturbed, args.normalize)?;
        print_score(&score);
    }
    Ok(())
}

pub fn benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    if args.backend.backend == BackendKind::Offline {
        return Err(CliError::usage(
            "benchmark scores texts and their perturbations, which needs a live backend; \
             pass --backend toy or --backend http",
        ));
    }
    let backend = live_backend(&args.backend)?;
    let pairs = read_pairs_jsonl(&args.dataset)?;
    if pairs.is_empty() {
        return Err(CliError::usage(format!(
            "{} contains no pairs",
            args.dataset.display()
        )));
    }

    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|m| parse_method(m))
            .collect::<Result<_, _>>()?
    };

    let dataset_id = args
        .dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.dataset.display().to_string());
    let mut cfg = BenchmarkConfig::new(dataset_id, methods.iter().copied());
    cfg.score_prompt = args.score_prompt;
    cfg.normalize_detect_gpt = args.normalize;
    cfg.measure_timing = args.timing;
    if methods.iter().any(Method::requires_perturbations) {
        let pert = args
            .perturbation
            .to_config(args.seed, Some(detectllm::perturb::DEFAULT_PERTURBATIONS))?
            .expect("default n always yields a config");
        cfg = cfg.with_perturbation(pert);
    }

    let outcome = run_benchmark(&pairs, backend.as_ref(), &cfg)?;
    if args.verbose {
        for failure in &outcome.failures {
            eprintln!("dropped {failure}");
        }
    }

    std::fs::write(&args.out, outcome.report.to_json_string())?;
    let table = outcome.report.to_table_string();
    print!("{table}");
    if let Some(path) = &args.table {
        std::fs::write(path, &table)?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, outcome.scores_csv()?)?;
    }
    eprintln!("report written to {}", args.out.display());
    Ok(())
}

fn decoding_from_flags(args: &GenDatasetArgs) -> Result<DecodingConfig, CliError> {
    let strategy = match args.decoding.as_str() {
        "temperature" => DecodingStrategy::Temperature,
        "top_k" => DecodingStrategy::TopK,
        "top_p" => DecodingStrategy::TopP,
        other => {
            return Err(CliError::usage(format!(
                "unknown decoding strategy {other:?}; expected temperature, top_k, or top_p"
            )))
        }
    };
    let cfg = DecodingConfig {
        strategy,
        temperature: args.temperature,
        k: match (strategy, args.k) {
            (DecodingStrategy::TopK, None) => Some(40),
            (_, k) => k,
        },
        p: match (strategy, args.p) {
            (DecodingStrategy::TopP, None) => Some(0.96),
            (_, p) => p,
        },
        seed: 0,
        greedy: args.greedy,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn gen_dataset(args: GenDatasetArgs) -> Result<(), CliError> {
    let backend = live_backend(&args.backend)?;
    let texts = read_corpus(&args.corpus)?;
    let cfg = DatagenConfig {
        prompt_tokens: args.prompt_tokens,
        n_pairs: args.pairs,
        min_len: args.min_len,
        decoding: decoding_from_flags(&args)?,
        seed: args.seed,
        max_tokens: args.max_tokens,
    };
    let mut build = build_pairs(&texts, backend.as_ref(), &cfg)?;
    build.metadata.corpus_source = args.corpus.display().to_string();

    write_pairs_jsonl(&args.out, &build.pairs)?;
    let meta_path = args.out.with_extension("meta.json");
    let mut meta = serde_json::to_string_pretty(&build.metadata)
        .map_err(|e| CliError::usage(format!("serializing metadata: {e}")))?;
    meta.push('\n');
    std::fs::write(&meta_path, meta)?;
    eprintln!(
        "wrote {} pairs to {} (metadata: {})",
        build.pairs.len(),
        args.out.display(),
        meta_path.display()
    );
    Ok(())
}

pub fn perturb(args: PerturbArgs) -> Result<(), CliError> {
    let text = read_input(&args.input)?;
    let cfg = args
        .perturbation
        .to_config(args.seed, Some(detectllm::perturb::DEFAULT_PERTURBATIONS))?
        .expect("default n always yields a config");
    let backend = if cfg.policy == PerturbationPolicy::MaskFillBackend {
        Some(live_backend(&args.backend)?)
    } else {
        None
    };
    let mut set = perturb_text(text.trim(), &cfg, backend.as_deref())?;
    set.original_id = args
        .input
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stdin".into());

    let mut rendered = serde_json::to_string_pretty(&set)
        .map_err(|e| CliError::usage(format!("serializing perturbation set: {e}")))?;
    rendered.push('\n');
    match &args.out {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

pub fn cost(args: CostArgs) -> Result<(), CliError> {
    let method = parse_method(&args.method)?;
    if method.requires_perturbations() && args.t_p.is_none() {
        return Err(CliError::usage(format!(
            "method {method} needs --t-p (seconds per perturbation)"
        )));
    }
    // t_p is unused by perturbation-free methods; any positive value works.
    let cm = CostModel {
        t_p: args.t_p.unwrap_or(1.0),
        t_m: args.t_m,
        n: args.n,
    };
    cm.validate()?;
    let seconds = estimate_cost(method, &cm);
    let mut payload = json!({
        "method": method,
        "t_m": args.t_m,
        "seconds": seconds,
    });
    if method.requires_perturbations() {
        payload["t_p"] = json!(args.t_p.unwrap());
        payload["n"] = json!(args.n);
    }
    println!("{payload}");
    Ok(())
}

pub fn train_toy(args: TrainToyArgs) -> Result<(), CliError> {
    let corpus = read_corpus(&args.corpus)?;
    let model = ToyModel::train(&corpus, args.order, args.alpha)?;
    model.save(&args.out)?;
    eprintln!(
        "trained {}-gram model (vocab {}) on {} passages -> {}",
        args.order,
        model.vocab_size(),
        corpus.len(),
        args.out.display()
    );
    Ok(())
}

pub fn sample_corpus(args: SampleCorpusArgs) -> Result<(), CliError> {
    if args.passages == 0 {
        return Err(CliError::usage("--passages must be >= 1"));
    }
    let passages = detectllm::fixture::synthetic_corpus(args.passages, args.seed);
    let mut body = passages.join("\n");
    body.push('\n');
    std::fs::write(&args.out, body)?;
    eprintln!("wrote {} passages to {}", args.passages, args.out.display());
    Ok(())
}

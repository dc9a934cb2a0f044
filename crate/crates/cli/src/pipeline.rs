use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mtdiag_core::classifier::{
    embed_samples, evaluate, train as train_model, Checkpoint, EmbeddedSample, Prediction, SidePolicy,
};
use mtdiag_core::corpus::{
    generate_base_corpus, load_corpus, read_manifest, split_corpus, synthesize_machine_corpus, write_manifest,
    ParallelSample,
};
use mtdiag_core::embed::{parse_vector_file, synthetic_vectors, tokenize, VectorTable};
use mtdiag_core::explainer::{
    explain_corpus, learn_patterns, read_explanations, write_explanations, ExplainOptions, Explanation, Method,
    PatternSet,
};
use mtdiag_core::sorter::{sort_predictions, SortKey};
use mtdiag_core::stats::{
    chi_squared_at, critical_value, phenomenon_report, top_discriminative_ngrams, StatsReport,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{CliError, PipelineConfig};

type Result<T> = std::result::Result<T, CliError>;

pub const SPLITS: [&str; 4] = ["train.jsonl", "valid.jsonl", "pattern.jsonl", "test.jsonl"];

/// Record of one completed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: String,
    pub config_checksum: String,
    /// output file name -> SHA-256 of its bytes
    pub outputs: BTreeMap<String, String>,
    pub summary: Value,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn stamp_path(cfg: &PipelineConfig, stage: &str) -> PathBuf {
    cfg.path(&format!("{stage}.stamp.json"))
}

fn write_stamp(cfg: &PipelineConfig, stage: &str, outputs: &[&Path], summary: Value) -> Result<()> {
    let mut hashes = BTreeMap::new();
    for p in outputs {
        let bytes = fs::read(p).map_err(|e| io_err(p, e))?;
        let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        hashes.insert(name, mtdiag_core::checksum(&bytes));
    }
    let stamp = Stamp {
        stage: stage.to_owned(),
        config_checksum: cfg.stage_checksum(stage),
        outputs: hashes,
        summary,
    };
    let path = stamp_path(cfg, stage);
    let bytes = serde_json::to_vec_pretty(&stamp).expect("stamp serializes");
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))
}

pub fn read_stamp(cfg: &PipelineConfig, stage: &str) -> Result<Option<Stamp>> {
    let path = stamp_path(cfg, stage);
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path, e)),
    }
}

fn mismatch(stage: &str, found: &str, current: &str) -> CliError {
    CliError::Data(format!(
        "config checksum mismatch: {stage} ran under {found}, current config is {current}; rerun {stage}"
    ))
}

/// Inputs produced by `stage` under a different config are fatal.
fn check_upstream(cfg: &PipelineConfig, stage: &str) -> Result<()> {
    if let Some(stamp) = read_stamp(cfg, stage)? {
        let current = cfg.stage_checksum(stage);
        if stamp.config_checksum != current {
            return Err(mismatch(stage, &stamp.config_checksum, &current));
        }
    }
    Ok(())
}

fn require(path: &Path, what: &str, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} missing; run {producer}")))
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&out).map_err(|e| io_err(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn ensure_work_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.work_dir).map_err(|e| io_err(&cfg.work_dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub samples: usize,
    pub vocabulary: usize,
    pub with_artifact: usize,
}

/// Generates the base corpus, injects the configured artifacts and writes
/// the three line-aligned files, ground truth and random vectors covering
/// the vocabulary.
pub fn synth(cfg: &PipelineConfig) -> Result<SynthSummary> {
    ensure_work_dir(cfg)?;
    let base = generate_base_corpus(&cfg.synth.base);
    let artifacts = if cfg.synth.null_control { &[][..] } else { &cfg.synth.artifacts[..] };
    let samples = synthesize_machine_corpus(&base, artifacts);

    let [src, hum, mac] = [cfg.path("source.txt"), cfg.path("human.txt"), cfg.path("machine.txt")];
    write_lines(&src, samples.iter().map(|s| s.source.clone()))?;
    write_lines(&hum, samples.iter().map(|s| s.human_translation.clone()))?;
    write_lines(&mac, samples.iter().map(|s| s.machine_translation.clone()))?;
    let truth = cfg.path("synth_manifest.jsonl");
    write_manifest(&truth, &samples)?;

    let tokens: Vec<String> = samples
        .iter()
        .flat_map(|s| [&s.source, &s.human_translation, &s.machine_translation])
        .flat_map(|t| tokenize(t))
        .collect();
    let table = synthetic_vectors(tokens.iter().map(String::as_str), cfg.synth.vector_dimension, cfg.synth.vector_seed)?;
    let vec_path = cfg.path("vectors.vec");
    table.write_to(&vec_path)?;

    let summary = SynthSummary {
        samples: samples.len(),
        vocabulary: table.token_count(),
        with_artifact: samples.iter().filter(|s| !s.injected_artifacts.is_empty()).count(),
    };
    write_stamp(cfg, "synth", &[&src, &hum, &mac, &truth, &vec_path], json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub skipped: usize,
    pub train: usize,
    pub validation: usize,
    pub pattern: usize,
    pub test: usize,
}

/// Loads the line-aligned corpus and writes the manifest and the four
/// splits. When the corpus is the synthetic one, injected artifacts are
/// carried over from the ground-truth manifest.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    ensure_work_dir(cfg)?;
    let [src, hum, mac] = cfg.corpus_paths();
    for (p, what) in [(&src, "source corpus"), (&hum, "human corpus"), (&mac, "machine corpus")] {
        require(p, what, "synth")?;
    }
    let loaded = load_corpus(&src, &hum, &mac)?;
    let mut samples = loaded.samples;
    let truth = cfg.path("synth_manifest.jsonl");
    if cfg.corpus == Default::default() && truth.exists() {
        check_upstream(cfg, "synth")?;
        let by_id: BTreeMap<u64, ParallelSample> = read_manifest(&truth)?.into_iter().map(|s| (s.id, s)).collect();
        for s in &mut samples {
            if let Some(t) = by_id.get(&s.id) {
                if t.source == s.source
                    && t.human_translation == s.human_translation
                    && t.machine_translation == s.machine_translation
                {
                    s.origin = t.origin;
                    s.injected_artifacts = t.injected_artifacts.clone();
                }
            }
        }
    }
    let splits = split_corpus(&samples, &cfg.split)?;
    let manifest = cfg.path("manifest.jsonl");
    write_manifest(&manifest, &samples)?;
    let paths: Vec<PathBuf> = SPLITS.iter().map(|n| cfg.path(n)).collect();
    for (p, part) in paths.iter().zip([&splits.train, &splits.validation, &splits.pattern, &splits.test]) {
        write_manifest(p, part)?;
    }
    let summary = IngestSummary {
        loaded: samples.len(),
        skipped: loaded.skipped,
        train: splits.train.len(),
        validation: splits.validation.len(),
        pattern: splits.pattern.len(),
        test: splits.test.len(),
    };
    let mut outputs: Vec<&Path> = vec![&manifest];
    outputs.extend(paths.iter().map(PathBuf::as_path));
    write_stamp(cfg, "ingest", &outputs, json!(summary))?;
    Ok(summary)
}

fn load_split_at(cfg: &PipelineConfig, path: &Path, what: &str) -> Result<Vec<ParallelSample>> {
    require(path, what, "ingest")?;
    if path.parent() == Some(cfg.work_dir.as_path()) {
        check_upstream(cfg, "ingest")?;
    }
    Ok(read_manifest(path)?)
}

pub fn load_split(cfg: &PipelineConfig, name: &str) -> Result<Vec<ParallelSample>> {
    let what = format!("{} split", name.trim_end_matches(".jsonl"));
    load_split_at(cfg, &cfg.path(name), &what)
}

pub fn load_vectors(cfg: &PipelineConfig) -> Result<VectorTable> {
    let path = cfg.vectors_path();
    require(&path, "vectors", "synth (or pass --vectors)")?;
    Ok(parse_vector_file(&path)?)
}

pub fn embed(cfg: &PipelineConfig, samples: &[ParallelSample], table: &VectorTable) -> Vec<EmbeddedSample> {
    embed_samples(samples, table, cfg.architecture.max_len)
}

/// Checkpoint plus the checksum of its bytes; refuses one trained under a
/// different config.
pub fn load_checkpoint(cfg: &PipelineConfig) -> Result<(Checkpoint, String)> {
    let path = cfg.checkpoint_path();
    require(&path, "checkpoint", "train")?;
    let (ckpt, sum) = Checkpoint::load(&path)?;
    let current = cfg.stage_checksum("train");
    match &ckpt.config_checksum {
        Some(c) if *c == current => Ok((ckpt, sum)),
        Some(c) => Err(mismatch("train", c, &current)),
        None => Err(CliError::Data("checkpoint carries no config checksum; rerun train".into())),
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainPaths {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub best_validation_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub no_signal: bool,
    pub checkpoint_checksum: String,
}

pub fn train(cfg: &PipelineConfig, paths: &TrainPaths) -> Result<TrainSummary> {
    ensure_work_dir(cfg)?;
    let train_set = match &paths.train {
        Some(p) => load_split_at(cfg, p, "train split")?,
        None => load_split(cfg, "train.jsonl")?,
    };
    let valid_set = match &paths.valid {
        Some(p) => load_split_at(cfg, p, "valid split")?,
        None => load_split(cfg, "valid.jsonl")?,
    };
    let table = load_vectors(cfg)?;
    let model = cfg.architecture.model(table.dimension());
    model.validate()?;
    let train_emb = embed(cfg, &train_set, &table);
    let valid_emb = embed(cfg, &valid_set, &table);
    let outcome = train_model(&train_emb, &valid_emb, &model, &cfg.training, cfg.seed)?;

    let ckpt_path = cfg.checkpoint_path();
    let checkpoint_checksum = Checkpoint::new(outcome.params, cfg.seed, Some(cfg.stage_checksum("train"))).save(&ckpt_path)?;
    let log_path = cfg.path("train_log.jsonl");
    write_jsonl(&log_path, &outcome.log)?;
    let summary = TrainSummary {
        best_validation_accuracy: outcome.best_validation_accuracy,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.iter().map(|e| e.epoch).max().unwrap_or(0),
        no_signal: outcome.no_signal,
        checkpoint_checksum,
    };
    write_stamp(cfg, "train", &[&ckpt_path, &log_path], json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(flatten)]
    pub prediction: Prediction,
    pub config_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub policy: SidePolicy,
    pub accuracy: f64,
    /// Accuracy with the machine translation on a seeded random side.
    pub random_side_accuracy: f64,
    pub samples: usize,
}

/// Scores the test split under the configured side policy, and reports
/// the random-side accuracy alongside.
pub fn eval(cfg: &PipelineConfig) -> Result<EvalSummary> {
    let test = load_split(cfg, "test.jsonl")?;
    let (ckpt, _) = load_checkpoint(cfg)?;
    let table = load_vectors(cfg)?;
    let emb = embed(cfg, &test, &table);
    let main = evaluate(&emb, &ckpt.params, cfg.eval_policy)?;
    let random = evaluate(&emb, &ckpt.params, SidePolicy::Random(cfg.seed.wrapping_add(3)))?;
    let checksum = cfg.stage_checksum("eval");
    let records: Vec<PredictionRecord> = main
        .predictions
        .into_iter()
        .map(|prediction| PredictionRecord {
            prediction,
            config_checksum: checksum.clone(),
        })
        .collect();
    let path = cfg.path("predictions.jsonl");
    write_jsonl(&path, &records)?;
    let summary = EvalSummary {
        policy: cfg.eval_policy,
        accuracy: main.accuracy,
        random_side_accuracy: random.accuracy,
        samples: records.len(),
    };
    write_stamp(cfg, "eval", &[&path], json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSummary {
    pub estimated_units: usize,
    pub fallback_units: usize,
}

pub fn patterns(cfg: &PipelineConfig) -> Result<PatternSummary> {
    let pattern_set = load_split(cfg, "pattern.jsonl")?;
    let (ckpt, _) = load_checkpoint(cfg)?;
    let table = load_vectors(cfg)?;
    let emb = embed(cfg, &pattern_set, &table);
    let set = learn_patterns(&emb, &ckpt.params)?;
    let path = cfg.patterns_path();
    set.save(&path)?;
    let summary = PatternSummary {
        estimated_units: set.estimated_units,
        fallback_units: set.fallback_units,
    };
    write_stamp(cfg, "patterns", &[&path], json!(summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainSummary {
    pub method: Method,
    pub explained: usize,
    pub store_checksum: String,
}

/// Explains the test split with the machine translation on the right.
pub fn explain(cfg: &PipelineConfig) -> Result<ExplainSummary> {
    let (ckpt, ckpt_sum) = load_checkpoint(cfg)?;
    let test = load_split(cfg, "test.jsonl")?;
    let table = load_vectors(cfg)?;
    let emb = embed(cfg, &test, &table);
    let patterns = match cfg.method {
        Method::PatternAttribution => {
            let path = cfg.patterns_path();
            require(&path, "patterns", "patterns")?;
            check_upstream(cfg, "patterns")?;
            Some(PatternSet::load(&path)?)
        }
        Method::LrpEpsilon => None,
    };
    let opts = ExplainOptions {
        method: cfg.method,
        target: cfg.target,
        epsilon: cfg.epsilon,
    };
    let mut explanations = explain_corpus(&emb, &ckpt.params, patterns.as_ref(), &opts, &ckpt_sum)?;
    let checksum = cfg.stage_checksum("explain");
    for e in &mut explanations {
        e.config_checksum = Some(checksum.clone());
    }
    let path = cfg.explanations_path();
    write_explanations(&path, &explanations)?;
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let summary = ExplainSummary {
        method: cfg.method,
        explained: explanations.len(),
        store_checksum: mtdiag_core::checksum(&bytes),
    };
    write_stamp(cfg, "explain", &[&path], json!(summary))?;
    Ok(summary)
}

pub fn load_explanations(cfg: &PipelineConfig) -> Result<Vec<Explanation>> {
    let path = cfg.explanations_path();
    require(&path, "explanations", "explain")?;
    let explanations = read_explanations(&path)?;
    let current = cfg.stage_checksum("explain");
    if let Some(found) = explanations.iter().find_map(|e| e.config_checksum.as_ref().filter(|c| **c != current)) {
        return Err(mismatch("explain", found, &current));
    }
    Ok(explanations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedIds {
    pub key: SortKey,
    pub ids: Vec<u64>,
    pub config_checksum: String,
}

pub fn sort(cfg: &PipelineConfig) -> Result<SortedIds> {
    let path = cfg.path("predictions.jsonl");
    require(&path, "predictions", "eval")?;
    let records: Vec<PredictionRecord> = read_jsonl(&path)?;
    let current = cfg.stage_checksum("eval");
    if let Some(r) = records.iter().find(|r| r.config_checksum != current) {
        return Err(mismatch("eval", &r.config_checksum, &current));
    }
    let predictions: Vec<Prediction> = records.into_iter().map(|r| r.prediction).collect();
    let sorted = SortedIds {
        key: cfg.sort,
        ids: sort_predictions(&predictions, cfg.sort),
        config_checksum: cfg.stage_checksum("sort"),
    };
    let out = cfg.path("sorted.json");
    write_json(&out, &sorted)?;
    write_stamp(cfg, "sort", &[&out], json!({ "key": cfg.sort, "count": sorted.ids.len() }))?;
    Ok(sorted)
}

/// Phenomenon tables on the test split and n-gram rankings from the
/// explanation store.
pub fn stats(cfg: &PipelineConfig) -> Result<StatsReport> {
    let test = load_split(cfg, "test.jsonl")?;
    let explanations = load_explanations(cfg)?;
    let human: Vec<&str> = test.iter().map(|s| s.human_translation.as_str()).collect();
    let machine: Vec<&str> = test.iter().map(|s| s.machine_translation.as_str()).collect();
    let sources: Vec<&str> = test.iter().map(|s| s.source.as_str()).collect();
    let alpha = cfg.stats.alpha;
    let mut phenomena = Vec::new();
    for spec in &cfg.stats.phenomena {
        let mut r = phenomenon_report(&human, &machine, Some(&sources), spec)?;
        r.chi_squared = chi_squared_at(&r.table, alpha);
        phenomena.push(r);
    }
    let mut top_ngrams = top_discriminative_ngrams(&explanations, &cfg.stats.ngrams)?;
    for n in &mut top_ngrams {
        n.chi_squared = chi_squared_at(&n.table, alpha);
    }
    let report = StatsReport {
        alpha,
        critical_value: critical_value(alpha),
        segments: test.len(),
        phenomena,
        top_ngrams,
        config_checksum: Some(cfg.stage_checksum("stats")),
    };
    let path = cfg.path("stats.json");
    write_json(&path, &report)?;
    write_stamp(cfg, "stats", &[&path], json!({ "phenomena": report.phenomena.len() }))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub synth: Option<SynthSummary>,
    pub ingest: IngestSummary,
    pub train: TrainSummary,
    pub eval: EvalSummary,
    pub patterns: PatternSummary,
    pub explain: ExplainSummary,
    pub sorted: usize,
    pub stats: StatsReport,
}

/// Every stage in order. The synthetic corpus is generated only when no
/// corpus paths are configured.
pub fn all(cfg: &PipelineConfig) -> Result<RunSummary> {
    let synth = if cfg.corpus == Default::default() { Some(synth(cfg)?) } else { None };
    let ingest = ingest(cfg)?;
    let train = train(cfg, &TrainPaths::default())?;
    let eval = eval(cfg)?;
    let patterns = patterns(cfg)?;
    let explain = explain(cfg)?;
    let sorted = sort(cfg)?.ids.len();
    let stats = stats(cfg)?;
    Ok(RunSummary {
        synth,
        ingest,
        train,
        eval,
        patterns,
        explain,
        sorted,
        stats,
    })
}

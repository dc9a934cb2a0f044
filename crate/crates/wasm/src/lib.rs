//! In-browser demo. Every export returns a JSON string so the page can
//! render it and native tests can read it; failures come back as
//! `{"error": "..."}`.

use mtdiag_core::classifier::{
    embed_samples, evaluate, forward, train, EmbeddedSample, ClassifierParams, ModelConfig, SidePolicy,
    TrainConfig,
};
use mtdiag_core::corpus::{
    generate_base_corpus, split_corpus, synthesize_machine_corpus, ArtifactKind, ArtifactSpec, BaseCorpusSpec,
    ParallelSample, SplitSpec,
};
use mtdiag_core::embed::{synthetic_vectors, tokenize, VectorTable};
use mtdiag_core::explainer::{explain, learn_patterns, ExplainOptions, Method, PatternSet, TargetNeuron};
use mtdiag_core::stats::{chi_squared, critical_value, ContingencyTable, DEFAULT_ALPHA};
use mtdiag_core::{Error, Side};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_LEN: usize = 30;

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| error_json(&e.to_string()))
}

fn error_json(message: &str) -> String {
    json!({ "error": message }).to_string()
}

fn respond<T: Serialize>(result: Result<T, Error>) -> String {
    match result {
        Ok(v) => to_json(&v),
        Err(e) => error_json(&e.to_string()),
    }
}

/// A discriminator trained on a small synthetic corpus, plus its patterns.
#[wasm_bindgen]
pub struct Demo {
    params: ClassifierParams,
    table: VectorTable,
    patterns: PatternSet,
    summary: String,
}

#[derive(Serialize)]
struct DemoSummary {
    train_samples: usize,
    test_samples: usize,
    test_accuracy: f64,
    vocabulary: usize,
    parameters: usize,
    examples: Vec<[String; 3]>,
}

fn build(samples: usize, seed: u64) -> Result<Demo, Error> {
    let base = generate_base_corpus(&BaseCorpusSpec {
        samples,
        seed,
        ..Default::default()
    });
    let artifacts = [
        ArtifactSpec::new(ArtifactKind::UnreduceNegation, 0.7, seed + 1)?,
        ArtifactSpec::new(ArtifactKind::MergeSentences, 0.5, seed + 2)?,
        ArtifactSpec::new(ArtifactKind::AppendEndMarker, 0.5, seed + 3)?,
    ];
    let corpus = synthesize_machine_corpus(&base, &artifacts);
    let splits = split_corpus(
        &corpus,
        &SplitSpec {
            train_fraction: 0.6,
            validation_fraction: 0.1,
            pattern_fraction: 0.1,
            test_fraction: 0.2,
            seed,
        },
    )?;
    let tokens: Vec<String> = corpus
        .iter()
        .flat_map(|s| [&s.source, &s.human_translation, &s.machine_translation])
        .flat_map(|t| tokenize(t))
        .collect();
    let table = synthetic_vectors(tokens.iter().map(String::as_str), 12, seed)?;
    let embed = |s: &[ParallelSample]| embed_samples(s, &table, MAX_LEN);
    let (train_set, valid_set, pattern_set, test_set) =
        (embed(&splits.train), embed(&splits.validation), embed(&splits.pattern), embed(&splits.test));
    let model = ModelConfig {
        max_len: MAX_LEN,
        dimension: table.dimension(),
        widths: vec![3, 4, 5],
        filters_per_width: 12,
        bias_free: false,
    };
    let config = TrainConfig {
        max_epochs: 4,
        batch_size: 32,
        ..Default::default()
    };
    let outcome = train(&train_set, &valid_set, &model, &config, seed)?;
    let accuracy = evaluate(&test_set, &outcome.params, SidePolicy::Random(seed))?.accuracy;
    let patterns = learn_patterns(&pattern_set, &outcome.params)?;
    let summary = to_json(&DemoSummary {
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        test_accuracy: accuracy,
        vocabulary: table.token_count(),
        parameters: outcome.params.parameter_count(),
        examples: splits
            .test
            .iter()
            .filter(|s| !s.injected_artifacts.is_empty())
            .take(5)
            .map(|s| [s.source.clone(), s.human_translation.clone(), s.machine_translation.clone()])
            .collect(),
    });
    Ok(Demo {
        params: outcome.params,
        table,
        patterns,
        summary,
    })
}

#[derive(Serialize)]
struct TokenOut {
    token: String,
    score: f64,
    known: bool,
}

#[derive(Serialize)]
struct ExplainOut {
    method: Method,
    predicted_machine: Side,
    softmax_machine: f64,
    logit_machine: f64,
    source: Vec<TokenOut>,
    left: Vec<TokenOut>,
    right: Vec<TokenOut>,
}

#[wasm_bindgen]
impl Demo {
    /// Generates and trains; takes a second or two for a few thousand
    /// samples.
    #[wasm_bindgen(constructor)]
    pub fn new(samples: usize, seed: u32) -> Result<Demo, String> {
        build(samples.max(100), u64::from(seed)).map_err(|e| e.to_string())
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// Explains the output neuron of whichever side the model believes is
    /// the machine translation. Positive scores are machine evidence.
    pub fn explain(&self, source: &str, left: &str, right: &str, method: &str) -> String {
        let method: Method = match method.parse() {
            Ok(m) => m,
            Err(e) => return error_json(&e.to_string()),
        };
        let sample = EmbeddedSample::new(
            &ParallelSample {
                id: 0,
                source: source.to_owned(),
                human_translation: left.to_owned(),
                machine_translation: right.to_owned(),
                origin: mtdiag_core::corpus::Origin::Real,
                injected_artifacts: Default::default(),
            },
            &self.table,
            MAX_LEN,
        );
        respond((|| {
            // the logits do not depend on the recorded side
            let mut triple = sample.triple(Side::Right);
            let (prediction, _) = forward(&triple, &self.params)?;
            triple.machine_side = prediction.predicted_side;
            let opts = ExplainOptions {
                method,
                target: TargetNeuron::Machine,
                ..Default::default()
            };
            let (_, e) = explain(&triple, &self.params, Some(&self.patterns), &opts, "")?;
            let tokens = |v: &[(String, f64)]| {
                v.iter()
                    .map(|(t, s)| TokenOut {
                        token: t.clone(),
                        score: *s,
                        known: self.table.lookup(t).is_some(),
                    })
                    .collect()
            };
            Ok(ExplainOut {
                method,
                predicted_machine: prediction.predicted_side,
                softmax_machine: e.softmax_machine,
                logit_machine: e.logit_machine,
                source: tokens(&e.token_scores.source),
                left: tokens(&e.token_scores.left),
                right: tokens(&e.token_scores.right),
            })
        })())
    }
}

/// Pearson χ² (1 dof) for a 2×2 table of segment counts: rows human and
/// machine, columns present and absent.
#[wasm_bindgen]
pub fn chi_squared_table(human_present: u32, human_absent: u32, machine_present: u32, machine_absent: u32) -> String {
    let table = ContingencyTable::new([
        [u64::from(human_present), u64::from(human_absent)],
        [u64::from(machine_present), u64::from(machine_absent)],
    ]);
    let test = chi_squared(&table);
    to_json(&json!({
        "statistic": test.statistic,
        "p_value": test.p_value,
        "significant": test.significant,
        "alpha": DEFAULT_ALPHA,
        "critical_value": critical_value(DEFAULT_ALPHA),
        "human_rate": table.human_rate(),
        "machine_rate": table.machine_rate(),
    }))
}

/// Applies the selected artifacts to one human translation.
#[wasm_bindgen]
pub fn inject_artifacts(source: &str, human: &str, unreduce: bool, merge: bool, end_marker: bool) -> String {
    let picked: Vec<ArtifactKind> = [
        (ArtifactKind::UnreduceNegation, unreduce),
        (ArtifactKind::MergeSentences, merge),
        (ArtifactKind::AppendEndMarker, end_marker),
    ]
    .into_iter()
    .filter_map(|(k, on)| on.then_some(k))
    .collect();
    let specs: Result<Vec<ArtifactSpec>, Error> = picked.iter().map(|&k| ArtifactSpec::new(k, 1.0, 0)).collect();
    let base = ParallelSample {
        id: 0,
        source: source.to_owned(),
        human_translation: human.to_owned(),
        machine_translation: human.to_owned(),
        origin: mtdiag_core::corpus::Origin::Real,
        injected_artifacts: Default::default(),
    };
    respond(specs.map(|specs| {
        let out = synthesize_machine_corpus(&[base], &specs).remove(0);
        json!({
            "machine": out.machine_translation,
            "fired": out.injected_artifacts,
        })
    }))
}

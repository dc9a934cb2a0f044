use std::path::{Path, PathBuf};

use mtdiag_core::classifier::{ModelConfig, SidePolicy, TrainConfig};
use mtdiag_core::corpus::{ArtifactKind, ArtifactSpec, BaseCorpusSpec, SplitSpec};
use mtdiag_core::explainer::{Method, TargetNeuron, DEFAULT_EPSILON};
use mtdiag_core::sorter::SortKey;
use mtdiag_core::stats::{default_phenomena, NgramOptions, PhenomenonSpec, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Line-aligned input corpus. Unset paths default to the files `synth`
/// writes into the work directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusPaths {
    pub source: Option<PathBuf>,
    pub human: Option<PathBuf>,
    pub machine: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub base: BaseCorpusSpec,
    pub artifacts: Vec<ArtifactSpec>,
    /// Machine translation is a verbatim copy of the human one.
    pub null_control: bool,
    pub vector_dimension: usize,
    pub vector_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            base: BaseCorpusSpec {
                samples: 9000,
                ..Default::default()
            },
            artifacts: vec![
                ArtifactSpec::new(ArtifactKind::UnreduceNegation, 0.7, 101).expect("valid"),
                ArtifactSpec::new(ArtifactKind::MergeSentences, 0.5, 102).expect("valid"),
                ArtifactSpec::new(ArtifactKind::AppendEndMarker, 0.5, 103).expect("valid"),
            ],
            null_control: false,
            vector_dimension: 16,
            vector_seed: 7,
        }
    }
}

/// Model shape minus the embedding dimension, which comes from the vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub max_len: usize,
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    pub bias_free: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            max_len: 60,
            widths: vec![3, 4, 5],
            filters_per_width: 64,
            bias_free: false,
        }
    }
}

impl Architecture {
    pub fn model(&self, dimension: usize) -> ModelConfig {
        ModelConfig {
            max_len: self.max_len,
            dimension,
            widths: self.widths.clone(),
            filters_per_width: self.filters_per_width,
            bias_free: self.bias_free,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub alpha: f64,
    pub phenomena: Vec<PhenomenonSpec>,
    pub ngrams: NgramOptions,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            alpha: DEFAULT_ALPHA,
            phenomena: default_phenomena(),
            ngrams: NgramOptions::default(),
        }
    }
}

/// The whole pipeline in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub work_dir: PathBuf,
    pub corpus: CorpusPaths,
    pub vectors: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub explanations: Option<PathBuf>,
    pub synth: SynthConfig,
    pub split: SplitSpec,
    pub architecture: Architecture,
    pub training: TrainConfig,
    pub seed: u64,
    pub eval_policy: SidePolicy,
    pub method: Method,
    pub target: TargetNeuron,
    pub epsilon: f64,
    pub sort: SortKey,
    pub stats: StatsConfig,
    pub bind: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            work_dir: PathBuf::from("run"),
            corpus: CorpusPaths::default(),
            vectors: None,
            checkpoint: None,
            patterns: None,
            explanations: None,
            synth: SynthConfig::default(),
            split: SplitSpec {
                train_fraction: 5.0 / 9.0,
                validation_fraction: 1.0 / 9.0,
                pattern_fraction: 1.0 / 9.0,
                test_fraction: 2.0 / 9.0,
                seed: 17,
            },
            architecture: Architecture::default(),
            training: TrainConfig::default(),
            seed: 42,
            eval_policy: SidePolicy::FixedRight,
            method: Method::LrpEpsilon,
            target: TargetNeuron::Machine,
            epsilon: DEFAULT_EPSILON,
            sort: SortKey::default(),
            stats: StatsConfig::default(),
            bind: "127.0.0.1:8080".into(),
        }
    }
}

/// Config sections each stage's output depends on, upstream included.
/// Paths and the bind address never change an artifact's content.
pub fn stage_sections(stage: &str) -> &'static [&'static str] {
    const SYNTH: &[&str] = &["synth"];
    const INGEST: &[&str] = &["synth", "split"];
    const TRAIN: &[&str] = &["synth", "split", "architecture", "training", "seed"];
    const EVAL: &[&str] = &["synth", "split", "architecture", "training", "seed", "eval_policy"];
    const EXPLAIN: &[&str] = &["synth", "split", "architecture", "training", "seed", "method", "target", "epsilon"];
    const SORT: &[&str] = &["synth", "split", "architecture", "training", "seed", "eval_policy", "sort"];
    const STATS: &[&str] = &[
        "synth", "split", "architecture", "training", "seed", "method", "target", "epsilon", "stats",
    ];
    const ALL: &[&str] = &[
        "synth", "split", "architecture", "training", "seed", "eval_policy", "method", "target", "epsilon", "sort",
        "stats",
    ];
    match stage {
        "synth" => SYNTH,
        "ingest" => INGEST,
        "train" | "patterns" => TRAIN,
        "eval" => EVAL,
        "explain" => EXPLAIN,
        "sort" => SORT,
        "stats" => STATS,
        _ => ALL,
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.split.validate()?;
        for a in &self.synth.artifacts {
            ArtifactSpec::new(a.kind, a.probability, a.seed)?;
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Usage(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(CliError::Usage(format!("alpha {} outside (0, 1)", self.stats.alpha)));
        }
        self.architecture.model(1).validate()?;
        Ok(())
    }

    /// SHA-256 over every content-bearing section, with object keys sorted.
    pub fn checksum(&self) -> String {
        self.stage_checksum("all")
    }

    /// SHA-256 over the sections `stage` depends on.
    pub fn stage_checksum(&self, stage: &str) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let picked: serde_json::Map<String, serde_json::Value> = stage_sections(stage)
            .iter()
            .map(|k| ((*k).to_owned(), value[*k].clone()))
            .collect();
        let bytes = serde_json::to_vec(&picked).expect("value serializes");
        mtdiag_core::checksum(&bytes)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.work_dir.join(name)
    }

    pub fn corpus_paths(&self) -> [PathBuf; 3] {
        let c = &self.corpus;
        [
            c.source.clone().unwrap_or_else(|| self.path("source.txt")),
            c.human.clone().unwrap_or_else(|| self.path("human.txt")),
            c.machine.clone().unwrap_or_else(|| self.path("machine.txt")),
        ]
    }

    pub fn vectors_path(&self) -> PathBuf {
        self.vectors.clone().unwrap_or_else(|| self.path("vectors.vec"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.path("checkpoint.json"))
    }

    pub fn patterns_path(&self) -> PathBuf {
        self.patterns.clone().unwrap_or_else(|| self.path("patterns.json"))
    }

    pub fn explanations_path(&self) -> PathBuf {
        self.explanations.clone().unwrap_or_else(|| self.path("explanations.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_ignores_locations() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            work_dir: "elsewhere".into(),
            bind: "0.0.0.0:1".into(),
            vectors: Some("v.vec".into()),
            ..a.clone()
        };
        assert_eq!(a.checksum(), b.checksum());
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn method_swap_keeps_training_checksum() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            method: Method::PatternAttribution,
            ..a.clone()
        };
        assert_eq!(a.stage_checksum("train"), b.stage_checksum("train"));
        assert_eq!(a.stage_checksum("patterns"), b.stage_checksum("patterns"));
        assert_ne!(a.stage_checksum("explain"), b.stage_checksum("explain"));
        assert_ne!(a.stage_checksum("stats"), b.stage_checksum("stats"));
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 5, "method": "pattern_attribution"}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.method, Method::PatternAttribution);
        assert_eq!(c.architecture, Architecture::default());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"method": "saliency"}"#).is_err());
    }

    #[test]
    fn default_split_matches_fixture_sizes() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let n = c.synth.base.samples as f64;
        assert_eq!((c.split.validation_fraction * n + 1e-9).floor(), 1000.0);
        assert_eq!((c.split.test_fraction * n + 1e-9).floor(), 2000.0);
    }
}

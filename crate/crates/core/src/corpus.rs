//! Parallel corpora: loading, deterministic splitting, and synthetic
//! machine corpora with injected, recorded artifacts.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    /// "n't" becomes "not", repairing "ca" and "wo" stems.
    UnreduceNegation,
    /// Internal sentence boundaries become comma splices.
    MergeSentences,
    /// A full stop is added when the source has no terminal end marker.
    AppendEndMarker,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 3] = [
        ArtifactKind::UnreduceNegation,
        ArtifactKind::MergeSentences,
        ArtifactKind::AppendEndMarker,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelSample {
    pub id: u64,
    pub source: String,
    pub human_translation: String,
    pub machine_translation: String,
    pub origin: Origin,
    #[serde(default)]
    pub injected_artifacts: BTreeSet<ArtifactKind>,
}

impl ParallelSample {
    pub fn is_valid(&self) -> bool {
        !self.source.trim().is_empty()
            && !self.human_translation.trim().is_empty()
            && !self.machine_translation.trim().is_empty()
            && (self.origin == Origin::Synthetic || self.injected_artifacts.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSpec {
    pub kind: ArtifactKind,
    pub probability: f64,
    pub seed: u64,
}

impl ArtifactSpec {
    pub fn new(kind: ArtifactKind, probability: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::InvalidArtifact(format!(
                "probability {probability} outside [0, 1]"
            )));
        }
        Ok(ArtifactSpec {
            kind,
            probability,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub pattern_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [
            self.train_fraction,
            self.validation_fraction,
            self.pattern_fraction,
            self.test_fraction,
        ];
        if fr.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidSplit(format!("negative fraction in {fr:?}")));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<ParallelSample>,
    pub validation: Vec<ParallelSample>,
    pub pattern: Vec<ParallelSample>,
    pub test: Vec<ParallelSample>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedCorpus {
    pub samples: Vec<ParallelSample>,
    pub skipped: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    // A trailing LF terminates the last line rather than opening a new one.
    Ok(text.lines().map(str::to_owned).collect())
}

/// Reads three line-aligned files. Lines where any field is blank are
/// skipped; ids are line indices.
pub fn load_corpus(
    source_path: impl AsRef<Path>,
    human_path: impl AsRef<Path>,
    machine_path: impl AsRef<Path>,
) -> Result<LoadedCorpus> {
    let source = read_lines(source_path.as_ref())?;
    let human = read_lines(human_path.as_ref())?;
    let machine = read_lines(machine_path.as_ref())?;
    if source.len() != human.len() || human.len() != machine.len() {
        return Err(Error::LineCountMismatch(
            source.len(),
            human.len(),
            machine.len(),
        ));
    }

    let mut samples = Vec::with_capacity(source.len());
    let mut skipped = 0;
    for (i, ((s, h), m)) in source.into_iter().zip(human).zip(machine).enumerate() {
        if s.trim().is_empty() || h.trim().is_empty() || m.trim().is_empty() {
            skipped += 1;
            continue;
        }
        samples.push(ParallelSample {
            id: i as u64,
            source: s,
            human_translation: h,
            machine_translation: m,
            origin: Origin::Real,
            injected_artifacts: BTreeSet::new(),
        });
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} lines with an empty field");
    }
    Ok(LoadedCorpus { samples, skipped })
}

fn split_size(fraction: f64, n: usize) -> usize {
    // Absorb representation error so that e.g. 0.29 * 100 floors to 29.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Shuffles with the split seed, then carves validation, pattern and test
/// blocks of floor size. Train keeps the remainder. Members of every split
/// are returned in input order.
pub fn split_corpus(samples: &[ParallelSample], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = samples.len();
    let n_valid = split_size(spec.validation_fraction, n);
    let n_pattern = split_size(spec.pattern_fraction, n);
    let n_test = split_size(spec.test_fraction, n);
    let n_fixed = n_valid + n_pattern + n_test;
    if n_fixed > n {
        return Err(Error::InvalidSplit(format!(
            "held-out sizes {n_fixed} exceed corpus size {n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    // 0 = train, 1 = validation, 2 = pattern, 3 = test
    let mut assignment = vec![0u8; n];
    for (rank, &idx) in order.iter().enumerate() {
        assignment[idx] = if rank < n_valid {
            1
        } else if rank < n_valid + n_pattern {
            2
        } else if rank < n_fixed {
            3
        } else {
            0
        };
    }

    let mut splits = Splits::default();
    for (sample, part) in samples.iter().zip(assignment) {
        let dest = match part {
            1 => &mut splits.validation,
            2 => &mut splits.pattern,
            3 => &mut splits.test,
            _ => &mut splits.train,
        };
        dest.push(sample.clone());
    }
    Ok(splits)
}

fn ends_with_marker(text: &str) -> bool {
    matches!(text.trim_end().chars().last(), Some('.' | '!' | '?'))
}

fn has_negation_site(text: &str) -> bool {
    text.split_whitespace().any(|t| t == "n't")
}

fn unreduce_negation(text: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    for tok in text.split_whitespace() {
        if tok == "n't" {
            if let Some(prev) = out.last_mut() {
                match prev.as_str() {
                    "ca" => *prev = "can".to_owned(),
                    "Ca" => *prev = "Can".to_owned(),
                    "wo" => *prev = "will".to_owned(),
                    "Wo" => *prev = "Will".to_owned(),
                    _ => {}
                }
            }
            out.push("not".to_owned());
        } else {
            out.push(tok.to_owned());
        }
    }
    out.join(" ")
}

/// Byte offsets of every ". " that is followed by an uppercase letter.
fn sentence_boundaries(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut sites = Vec::new();
    for (i, _) in text.match_indices(". ") {
        let rest = &text[i + 2..];
        if i > 0 && rest.chars().next().is_some_and(char::is_uppercase) {
            sites.push(i);
        }
        debug_assert_eq!(bytes[i], b'.');
    }
    sites
}

fn merge_sentences(text: &str) -> String {
    let sites = sentence_boundaries(text);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for i in sites {
        out.push_str(&text[cursor..i]);
        out.push_str(", ");
        let rest = &text[i + 2..];
        let first = rest.chars().next().expect("site has a following capital");
        out.extend(first.to_lowercase());
        cursor = i + 2 + first.len_utf8();
    }
    out.push_str(&text[cursor..]);
    out
}

fn has_site(kind: ArtifactKind, source: &str, translation: &str) -> bool {
    match kind {
        ArtifactKind::UnreduceNegation => has_negation_site(translation),
        ArtifactKind::MergeSentences => !sentence_boundaries(translation).is_empty(),
        ArtifactKind::AppendEndMarker => !ends_with_marker(source) && !ends_with_marker(translation),
    }
}

fn apply(kind: ArtifactKind, translation: &str) -> String {
    match kind {
        ArtifactKind::UnreduceNegation => unreduce_negation(translation),
        ArtifactKind::MergeSentences => merge_sentences(translation),
        ArtifactKind::AppendEndMarker => format!("{} .", translation.trim_end()),
    }
}

/// Rebuilds every machine translation as a copy of the human one with each
/// artifact applied independently. Every artifact draws one uniform per
/// sample from its own seeded stream, whether or not the sample has a site.
pub fn synthesize_machine_corpus(
    base: &[ParallelSample],
    artifacts: &[ArtifactSpec],
) -> Vec<ParallelSample> {
    let mut streams: Vec<ChaCha8Rng> = artifacts
        .iter()
        .map(|a| ChaCha8Rng::seed_from_u64(a.seed))
        .collect();
    base.iter()
        .map(|sample| {
            let mut machine = sample.human_translation.clone();
            let mut fired = BTreeSet::new();
            for (spec, rng) in artifacts.iter().zip(streams.iter_mut()) {
                let u: f64 = rng.random();
                if u < spec.probability && has_site(spec.kind, &sample.source, &machine) {
                    machine = apply(spec.kind, &machine);
                    fired.insert(spec.kind);
                }
            }
            ParallelSample {
                machine_translation: machine,
                origin: Origin::Synthetic,
                injected_artifacts: fired,
                ..sample.clone()
            }
        })
        .collect()
}

/// Rates controlling which artifact sites the synthetic base corpus offers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseCorpusSpec {
    pub samples: usize,
    /// Probability that the first sentence carries a reduced negation.
    pub negation_rate: f64,
    /// Probability of a second sentence.
    pub multi_sentence_rate: f64,
    /// Probability that source and human translation lack a final end marker.
    pub open_ending_rate: f64,
    pub seed: u64,
}

impl Default for BaseCorpusSpec {
    fn default() -> Self {
        BaseCorpusSpec {
            samples: 8000,
            negation_rate: 1.0,
            multi_sentence_rate: 0.8,
            open_ending_rate: 0.8,
            seed: 11,
        }
    }
}

const SUBJECTS: &[&str] = &[
    "I", "We", "They", "You", "He", "She", "The minister", "The company", "Our team",
    "The committee", "My neighbour", "The government", "The council", "Most students",
    "The old man", "Her brother", "The police", "Local farmers",
];
const NEGATED_AUX: &[&str] = &[
    "do n't", "does n't", "did n't", "ca n't", "wo n't", "could n't", "should n't",
    "would n't", "is n't going to",
];
const AFFIRMED_AUX: &[&str] = &["will", "can", "did", "could", "should", "would", "might"];
const VERBS: &[&str] = &[
    "approve", "accept", "explain", "support", "change", "sign", "discuss", "publish",
    "remember", "finish", "visit", "repair", "announce", "reject", "build", "sell",
];
const OBJECTS: &[&str] = &[
    "the new budget", "the contract", "the final report", "this plan", "the proposal",
    "the old bridge", "the agreement", "their decision", "the results", "the rules",
    "the house", "a new school", "the price", "the letter", "the reform", "the law",
];
const ADVERBIALS: &[&str] = &[
    "yesterday", "this week", "in time", "at all", "before Friday", "next year",
    "last month", "today", "in the end", "without help", "so quickly", "on Monday",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn clause(rng: &mut ChaCha8Rng, negated: bool) -> String {
    let aux = if negated {
        pick(rng, NEGATED_AUX)
    } else {
        pick(rng, AFFIRMED_AUX)
    };
    format!(
        "{} {} {} {} {}",
        pick(rng, SUBJECTS),
        aux,
        pick(rng, VERBS),
        pick(rng, OBJECTS),
        pick(rng, ADVERBIALS)
    )
}

/// Deterministic pseudo-word standing in for the source-language rendering
/// of an English token.
fn source_word(token: &str) -> String {
    const SYL: [&str; 16] = [
        "ka", "lo", "mi", "ten", "ru", "sa", "vek", "do", "ni", "por", "le", "ust", "ba", "zi",
        "an", "ef",
    ];
    match token {
        "." | "!" | "?" => return token.to_owned(),
        "n't" => return "nich".to_owned(),
        _ => {}
    }
    let h = crate::checksum(token.as_bytes());
    let bytes = h.as_bytes();
    let n = 2 + (bytes[0] % 2) as usize;
    let mut w: String = (0..n)
        .map(|i| SYL[(bytes[i + 1] % 16) as usize])
        .collect();
    if token.chars().next().is_some_and(char::is_uppercase) {
        let mut c = w.chars();
        let first = c.next().unwrap().to_uppercase().collect::<String>();
        w = first + c.as_str();
    }
    w
}

fn render_source(english: &str) -> String {
    english
        .split_whitespace()
        .map(source_word)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pre-tokenized English "human" translations with pseudo-word sources.
/// The machine translation of every sample is a verbatim copy.
pub fn generate_base_corpus(spec: &BaseCorpusSpec) -> Vec<ParallelSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.samples)
        .map(|i| {
            let negated = rng.random::<f64>() < spec.negation_rate;
            let multi = rng.random::<f64>() < spec.multi_sentence_rate;
            let open = rng.random::<f64>() < spec.open_ending_rate;
            let mut human = clause(&mut rng, negated);
            if multi {
                let second_negated = rng.random::<f64>() < 0.3;
                human.push_str(" . ");
                human.push_str(&clause(&mut rng, second_negated));
            }
            if !open {
                human.push_str(" .");
            }
            ParallelSample {
                id: i as u64,
                source: render_source(&human),
                machine_translation: human.clone(),
                human_translation: human,
                origin: Origin::Synthetic,
                injected_artifacts: BTreeSet::new(),
            }
        })
        .collect()
}

/// One JSON object per line.
pub fn write_manifest(path: impl AsRef<Path>, samples: &[ParallelSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ParallelSample>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line)?);
    }
    Ok(samples)
}

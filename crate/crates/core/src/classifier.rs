//! The three-branch convolutional discriminator: each input (left
//! translation, source, right translation) is convolved by its own filter
//! banks and max-pooled, and one dense layer maps the concatenated features
//! to two logits. The left neuron claims "machine text is on the left", the
//! right neuron "machine text is on the right".

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ParallelSample;
use crate::embed::{embed_sentence, tokenize, TokenMatrix, VectorTable, DEFAULT_MAX_LEN};
use crate::nn::{self, relu, softmax, Adam, AdamConfig, Conv1dLayer, DenseLayer, MaxPool, Tensor2D};
use crate::{Error, Result, Side};

pub const CHECKPOINT_MAGIC: &str = "mtdiag-checkpoint/1";

/// The three network inputs in feature-concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    Left,
    Source,
    Right,
}

impl Input {
    pub const ALL: [Input; 3] = [Input::Left, Input::Source, Input::Right];

    pub fn index(self) -> usize {
        match self {
            Input::Left => 0,
            Input::Source => 1,
            Input::Right => 2,
        }
    }

    pub fn of_side(side: Side) -> Input {
        match side {
            Side::Left => Input::Left,
            Side::Right => Input::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_len: usize,
    pub dimension: usize,
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Pins every bias to zero, during initialization and training.
    #[serde(default)]
    pub bias_free: bool,
}

impl ModelConfig {
    pub fn new(dimension: usize) -> Self {
        ModelConfig {
            max_len: DEFAULT_MAX_LEN,
            dimension,
            widths: vec![3, 4, 5],
            filters_per_width: 64,
            bias_free: false,
        }
    }

    pub fn branch_features(&self) -> usize {
        self.widths.len() * self.filters_per_width
    }

    pub fn feature_count(&self) -> usize {
        3 * self.branch_features()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 || self.dimension == 0 || self.filters_per_width == 0 {
            return Err(Error::Config("max_len, dimension and filters must be positive".into()));
        }
        if self.widths.is_empty() {
            return Err(Error::Config("at least one filter width is required".into()));
        }
        if let Some(w) = self.widths.iter().find(|&&w| w == 0 || w > self.max_len) {
            return Err(Error::Config(format!(
                "filter width {w} outside 1..={}",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// Filter banks of one input, one per configured width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub convs: Vec<Conv1dLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub config: ModelConfig,
    pub conv_left: Branch,
    pub conv_source: Branch,
    pub conv_right: Branch,
    pub dense: DenseLayer,
}

impl ClassifierParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let branch = || Branch {
            convs: config
                .widths
                .iter()
                .map(|&w| Conv1dLayer::zeros(w, config.dimension, config.filters_per_width))
                .collect(),
        };
        Ok(ClassifierParams {
            config: config.clone(),
            conv_left: branch(),
            conv_source: branch(),
            conv_right: branch(),
            dense: DenseLayer::zeros(2, config.feature_count()),
        })
    }

    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut branch = || Branch {
            convs: config
                .widths
                .iter()
                .map(|&w| Conv1dLayer::init(w, config.dimension, config.filters_per_width, &mut rng))
                .collect(),
        };
        let (conv_left, conv_source, conv_right) = (branch(), branch(), branch());
        let dense = DenseLayer::init(2, config.feature_count(), &mut rng);
        Ok(ClassifierParams {
            config: config.clone(),
            conv_left,
            conv_source,
            conv_right,
            dense,
        })
    }

    pub fn branch(&self, input: Input) -> &Branch {
        match input {
            Input::Left => &self.conv_left,
            Input::Source => &self.conv_source,
            Input::Right => &self.conv_right,
        }
    }

    pub fn branch_mut(&mut self, input: Input) -> &mut Branch {
        match input {
            Input::Left => &mut self.conv_left,
            Input::Source => &mut self.conv_source,
            Input::Right => &mut self.conv_right,
        }
    }

    /// Offset of a conv bank's channels in the concatenated feature vector.
    pub fn feature_offset(&self, input: Input, bank: usize) -> usize {
        input.index() * self.config.branch_features() + bank * self.config.filters_per_width
    }

    /// Every weight and bias tensor in a fixed order: per input, per bank
    /// (weights, bias), then the dense weights and bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for input in Input::ALL {
            for conv in &self.branch(input).convs {
                out.push(conv.weights.as_slice());
                out.push(conv.bias.as_slice());
            }
        }
        out.push(self.dense.weights.as_slice());
        out.push(self.dense.bias.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for branch in [&mut self.conv_left, &mut self.conv_source, &mut self.conv_right] {
            for conv in &mut branch.convs {
                out.push(conv.weights.as_mut_slice());
                out.push(conv.bias.as_mut_slice());
            }
        }
        out.push(self.dense.weights.as_mut_slice());
        out.push(self.dense.bias.as_mut_slice());
        out
    }

    pub fn zero_biases(&mut self) {
        for branch in [&mut self.conv_left, &mut self.conv_source, &mut self.conv_right] {
            for conv in &mut branch.convs {
                conv.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        self.dense.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Adds `scale * other` into `self`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ClassifierParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

/// One sample in network-input form. `machine_side` names the translation
/// matrix holding the machine text and doubles as the training label.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedTriple {
    pub left: TokenMatrix,
    pub source: TokenMatrix,
    pub right: TokenMatrix,
    pub machine_side: Side,
    pub sample_id: u64,
}

impl EmbeddedTriple {
    pub fn input(&self, input: Input) -> &TokenMatrix {
        match input {
            Input::Left => &self.left,
            Input::Source => &self.source,
            Input::Right => &self.right,
        }
    }

    pub fn input_mut(&mut self, input: Input) -> &mut TokenMatrix {
        match input {
            Input::Left => &mut self.left,
            Input::Source => &mut self.source,
            Input::Right => &mut self.right,
        }
    }
}

/// A sample embedded once, from which triples with either side assignment
/// are assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSample {
    pub id: u64,
    pub source: TokenMatrix,
    pub human: TokenMatrix,
    pub machine: TokenMatrix,
}

impl EmbeddedSample {
    pub fn new(sample: &ParallelSample, table: &VectorTable, max_len: usize) -> Self {
        let embed = |text: &str| embed_sentence(&tokenize(text), table, max_len);
        EmbeddedSample {
            id: sample.id,
            source: embed(&sample.source),
            human: embed(&sample.human_translation),
            machine: embed(&sample.machine_translation),
        }
    }

    pub fn triple(&self, machine_side: Side) -> EmbeddedTriple {
        let (left, right) = match machine_side {
            Side::Left => (self.machine.clone(), self.human.clone()),
            Side::Right => (self.human.clone(), self.machine.clone()),
        };
        EmbeddedTriple {
            left,
            source: self.source.clone(),
            right,
            machine_side,
            sample_id: self.id,
        }
    }
}

pub fn embed_samples(samples: &[ParallelSample], table: &VectorTable, max_len: usize) -> Vec<EmbeddedSample> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples
            .par_iter()
            .map(|s| EmbeddedSample::new(s, table, max_len))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    samples.iter().map(|s| EmbeddedSample::new(s, table, max_len)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: u64,
    /// (left neuron, right neuron)
    pub logits: [f64; 2],
    pub softmax: [f64; 2],
    pub predicted_side: Side,
    pub true_side: Side,
}

impl Prediction {
    pub fn from_logits(sample_id: u64, logits: [f64; 2], true_side: Side) -> Self {
        let p = softmax(&logits);
        // ties resolve to the left neuron
        let predicted_side = if logits[1] > logits[0] {
            Side::Right
        } else {
            Side::Left
        };
        Prediction {
            sample_id,
            logits,
            softmax: [p[0], p[1]],
            predicted_side,
            true_side,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_side == self.true_side
    }

    /// Logit of the neuron that fires for the true machine side.
    pub fn logit_machine(&self) -> f64 {
        self.logits[self.true_side.index()]
    }

    pub fn logit_human(&self) -> f64 {
        self.logits[self.true_side.other().index()]
    }

    pub fn softmax_machine(&self) -> f64 {
        self.softmax[self.true_side.index()]
    }

    pub fn softmax_human(&self) -> f64 {
        self.softmax[self.true_side.other().index()]
    }
}

/// Pre-activations and pooling decisions of one conv bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCache {
    pub pre: Tensor2D,
    pub pool: MaxPool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Indexed by [`Input::index`], then by bank.
    pub banks: [Vec<ConvCache>; 3],
    pub features: Vec<f64>,
    pub logits: [f64; 2],
}

impl ForwardCache {
    pub fn bank(&self, input: Input, bank: usize) -> &ConvCache {
        &self.banks[input.index()][bank]
    }
}

pub fn forward(triple: &EmbeddedTriple, params: &ClassifierParams) -> Result<(Prediction, ForwardCache)> {
    let cfg = &params.config;
    let mut features = Vec::with_capacity(cfg.feature_count());
    let mut banks: [Vec<ConvCache>; 3] = Default::default();
    for input in Input::ALL {
        let m = &triple.input(input).matrix;
        if m.rows() != cfg.max_len || m.cols() != cfg.dimension {
            return Err(Error::Shape(format!(
                "{input:?} input is {}x{}, model expects {}x{}",
                m.rows(),
                m.cols(),
                cfg.max_len,
                cfg.dimension
            )));
        }
        for conv in &params.branch(input).convs {
            let pre = conv.forward(m)?;
            let mut activated = pre.clone();
            activated.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
            let pool = nn::max_pool(&activated);
            features.extend_from_slice(&pool.values);
            banks[input.index()].push(ConvCache { pre, pool });
        }
    }
    let logits = params.dense.forward(&features)?;
    let logits = [logits[0], logits[1]];
    let prediction = Prediction::from_logits(triple.sample_id, logits, triple.machine_side);
    Ok((
        prediction,
        ForwardCache {
            banks,
            features,
            logits,
        },
    ))
}

/// How the machine translation is placed when evaluating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "seed")]
pub enum SidePolicy {
    Random(u64),
    FixedRight,
}

impl SidePolicy {
    pub fn sides(self, n: usize) -> Vec<Side> {
        match self {
            SidePolicy::FixedRight => vec![Side::Right; n],
            SidePolicy::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| random_side(&mut rng)).collect()
            }
        }
    }
}

fn random_side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random::<bool>() {
        Side::Right
    } else {
        Side::Left
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Prediction>,
}

pub fn predict_all(triples: &[EmbeddedTriple], params: &ClassifierParams) -> Result<Vec<Prediction>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        triples
            .par_iter()
            .map(|t| forward(t, params).map(|(p, _)| p))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    triples.iter().map(|t| forward(t, params).map(|(p, _)| p)).collect()
}

pub fn evaluate(samples: &[EmbeddedSample], params: &ClassifierParams, policy: SidePolicy) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let triples: Vec<EmbeddedTriple> = samples
        .iter()
        .zip(policy.sides(samples.len()))
        .map(|(s, side)| s.triple(side))
        .collect();
    let predictions = predict_all(&triples, params)?;
    let correct = predictions.iter().filter(|p| p.is_correct()).count();
    Ok(Evaluation {
        accuracy: correct as f64 / predictions.len() as f64,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Validation accuracy must exceed 0.5 by this much to count as signal.
    pub signal_margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 10,
            patience: 3,
            batch_size: 64,
            optimizer: AdamConfig::default(),
            signal_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub step: u64,
    pub loss: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    pub log: Vec<TrainLogEntry>,
    pub best_validation_accuracy: f64,
    pub best_epoch: usize,
    /// Set when validation accuracy never cleared chance by the margin.
    pub no_signal: bool,
}

/// Mini-batch training with a fresh machine-side draw for every sample in
/// every epoch. Validation uses one fixed random side assignment; the
/// best-validation parameters are returned.
pub fn train(
    train: &[EmbeddedSample],
    validation: &[EmbeddedSample],
    model: &ModelConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut params = ClassifierParams::init(model, seed)?;
    if model.bias_free {
        params.zero_biases();
    }
    let mut optimizer = Adam::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let validation_policy = SidePolicy::Random(seed.wrapping_add(2));

    let mut log = Vec::new();
    let mut best = (evaluate(validation, &params, validation_policy)?.accuracy, 0usize);
    let mut best_params = params.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_id = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let sides: Vec<Side> = (0..train.len()).map(|_| random_side(&mut rng)).collect();
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<EmbeddedTriple> = chunk.iter().map(|&i| train[i].triple(sides[i])).collect();
            let loss = nn::backward_and_step(&batch, &mut params, &mut optimizer, batch_id)?;
            batch_id += 1;
            epoch_loss += loss;
            batches += 1;
            log.push(TrainLogEntry {
                epoch,
                step: optimizer.steps(),
                loss,
                validation_accuracy: None,
            });
        }
        let accuracy = evaluate(validation, &params, validation_policy)?.accuracy;
        log.push(TrainLogEntry {
            epoch,
            step: optimizer.steps(),
            loss: epoch_loss / batches as f64,
            validation_accuracy: Some(accuracy),
        });
        log::info!("epoch {epoch}: loss {:.4}, validation accuracy {accuracy:.4}", epoch_loss / batches as f64);
        if accuracy > best.0 {
            best = (accuracy, epoch);
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let no_signal = best.0 <= 0.5 + config.signal_margin;
    if no_signal {
        log::warn!(
            "no signal learned: best validation accuracy {:.4} does not exceed chance by {}",
            best.0,
            config.signal_margin
        );
    }
    Ok(TrainOutcome {
        params: best_params,
        log,
        best_validation_accuracy: best.0,
        best_epoch: best.1,
        no_signal,
    })
}

/// Serialized parameters with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub seed: u64,
    #[serde(default)]
    pub config_checksum: Option<String>,
    pub params: ClassifierParams,
}

impl Checkpoint {
    pub fn new(params: ClassifierParams, seed: u64, config_checksum: Option<String>) -> Self {
        Checkpoint {
            magic: CHECKPOINT_MAGIC.to_owned(),
            seed,
            config_checksum,
            params,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        if ckpt.magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ckpt.magic)));
        }
        ckpt.params.config.validate()?;
        let fresh = ClassifierParams::zeros(&ckpt.params.config)?;
        let shapes_match = fresh
            .tensors()
            .iter()
            .zip(ckpt.params.tensors())
            .all(|(a, b)| a.len() == b.len());
        if !shapes_match || fresh.tensors().len() != ckpt.params.tensors().len() {
            return Err(Error::Checkpoint("weight shapes disagree with the config".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(crate::checksum(&bytes))
    }

    /// Returns the checkpoint and the checksum of the file bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok((Self::from_bytes(&bytes)?, crate::checksum(&bytes)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            max_len: 6,
            dimension: 4,
            widths: vec![2, 3],
            filters_per_width: 2,
            bias_free: false,
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, cfg: &ModelConfig, valid: usize) -> TokenMatrix {
        let mut m = TokenMatrix::zeros(cfg.max_len, cfg.dimension);
        for r in 0..valid {
            for v in m.matrix.row_mut(r) {
                *v = rng.random_range(-1.0..1.0);
            }
            m.tokens.push(format!("t{r}"));
        }
        m.valid_length = valid;
        m
    }

    fn random_triple(rng: &mut ChaCha8Rng, cfg: &ModelConfig, id: u64) -> EmbeddedTriple {
        EmbeddedTriple {
            left: random_matrix(rng, cfg, 5),
            source: random_matrix(rng, cfg, 4),
            right: random_matrix(rng, cfg, 6),
            machine_side: Side::Right,
            sample_id: id,
        }
    }

    /// Straight-line re-derivation of the logits with explicit loops.
    fn naive_logits(t: &EmbeddedTriple, p: &ClassifierParams) -> [f64; 2] {
        let cfg = &p.config;
        let mut feats = Vec::new();
        for input in Input::ALL {
            let x = &t.input(input).matrix;
            for conv in &p.branch(input).convs {
                for c in 0..cfg.filters_per_width {
                    let mut best = f64::NEG_INFINITY;
                    for pos in 0..=(cfg.max_len - conv.width) {
                        let mut z = conv.bias[c];
                        for k in 0..conv.width {
                            for j in 0..cfg.dimension {
                                z += conv.weights.get(c, k * cfg.dimension + j) * x.get(pos + k, j);
                            }
                        }
                        best = best.max(z.max(0.0));
                    }
                    feats.push(best);
                }
            }
        }
        let mut out = [0.0; 2];
        for (j, o) in out.iter_mut().enumerate() {
            *o = p.dense.bias[j];
            for (i, f) in feats.iter().enumerate() {
                *o += p.dense.weights.get(j, i) * f;
            }
        }
        out
    }

    #[test]
    fn zero_network_is_indifferent() {
        let cfg = tiny_config();
        let p = ClassifierParams::zeros(&cfg).unwrap();
        let t = EmbeddedTriple {
            left: TokenMatrix::zeros(6, 4),
            source: TokenMatrix::zeros(6, 4),
            right: TokenMatrix::zeros(6, 4),
            machine_side: Side::Right,
            sample_id: 0,
        };
        let (pred, _) = forward(&t, &p).unwrap();
        assert_eq!(pred.logits, [0.0, 0.0]);
        assert_eq!(pred.softmax, [0.5, 0.5]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let cfg = tiny_config();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for i in 0..20 {
            let mut p = ClassifierParams::init(&cfg, i).unwrap();
            for t in p.tensors_mut() {
                for v in t.iter_mut() {
                    *v += rng.random_range(-0.1..0.1);
                }
            }
            let t = random_triple(&mut rng, &cfg, i);
            let (pred, cache) = forward(&t, &p).unwrap();
            let want = naive_logits(&t, &p);
            for j in 0..2 {
                assert!((pred.logits[j] - want[j]).abs() <= 1e-10 * want[j].abs().max(1.0));
            }
            assert_eq!(cache.features.len(), cfg.feature_count());
            assert_eq!(pred.predicted_side, if want[1] > want[0] { Side::Right } else { Side::Left });
        }
    }

    #[test]
    fn mirrored_network_swaps_logits() {
        let cfg = tiny_config();
        let mut p = ClassifierParams::init(&cfg, 3).unwrap();
        p.conv_right = p.conv_left.clone();
        // dense row 1 is row 0 with the left and right feature blocks exchanged
        let bf = cfg.branch_features();
        let row0 = p.dense.weights.row(0).to_vec();
        let mut row1 = row0.clone();
        row1[..bf].copy_from_slice(&row0[2 * bf..]);
        row1[2 * bf..].copy_from_slice(&row0[..bf]);
        p.dense.weights.row_mut(1).copy_from_slice(&row1);
        p.dense.bias = vec![0.2, 0.2];

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_triple(&mut rng, &cfg, 0);
        let mut swapped = t.clone();
        std::mem::swap(&mut swapped.left, &mut swapped.right);
        let (a, _) = forward(&t, &p).unwrap();
        let (b, _) = forward(&swapped, &p).unwrap();
        assert!((a.logits[0] - b.logits[1]).abs() < 1e-12);
        assert!((a.logits[1] - b.logits[0]).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = tiny_config();
        let p = ClassifierParams::zeros(&cfg).unwrap();
        let t = EmbeddedTriple {
            left: TokenMatrix::zeros(6, 3),
            source: TokenMatrix::zeros(6, 4),
            right: TokenMatrix::zeros(6, 4),
            machine_side: Side::Right,
            sample_id: 0,
        };
        assert!(matches!(forward(&t, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn constant_left_model_scores_zero_under_fixed_right() {
        let cfg = tiny_config();
        let mut p = ClassifierParams::zeros(&cfg).unwrap();
        p.dense.bias = vec![1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<EmbeddedSample> = (0..10)
            .map(|i| EmbeddedSample {
                id: i,
                source: random_matrix(&mut rng, &cfg, 3),
                human: random_matrix(&mut rng, &cfg, 3),
                machine: random_matrix(&mut rng, &cfg, 3),
            })
            .collect();
        let eval = evaluate(&samples, &p, SidePolicy::FixedRight).unwrap();
        assert_eq!(eval.accuracy, 0.0);
        assert!(eval.predictions.iter().all(|p| p.logits == [1.0, 0.0]));
        assert!(matches!(evaluate(&[], &p, SidePolicy::FixedRight), Err(Error::Empty(_))));
    }

    #[test]
    fn random_logit_model_is_at_chance() {
        // Independent random logits against random sides.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sides = SidePolicy::Random(99).sides(4000);
        let correct = sides
            .iter()
            .enumerate()
            .filter(|(i, &side)| {
                let p = Prediction::from_logits(*i as u64, [rng.random(), rng.random()], side);
                p.is_correct()
            })
            .count();
        let acc = correct as f64 / 4000.0;
        assert!((acc - 0.5).abs() <= 0.03, "{acc}");
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cfg = tiny_config();
        let p = ClassifierParams::init(&cfg, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let sum = Checkpoint::new(p.clone(), 8, None).save(&path).unwrap();
        let (loaded, sum2) = Checkpoint::load(&path).unwrap();
        assert_eq!(sum, sum2);
        assert_eq!(loaded.params, p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_triple(&mut rng, &cfg, 0);
        assert_eq!(forward(&t, &p).unwrap().0, forward(&t, &loaded.params).unwrap().0);
    }

    #[test]
    fn checkpoint_rejects_wrong_magic() {
        let cfg = tiny_config();
        let mut c = Checkpoint::new(ClassifierParams::zeros(&cfg).unwrap(), 0, None);
        c.magic = "other".into();
        let bytes = serde_json::to_vec(&c).unwrap();
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(_))));
    }
}

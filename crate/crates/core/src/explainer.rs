//! Backward attribution of a classification decision onto the input tokens.
//!
//! Two rules are provided and share one entry point ([`explain`]):
//!
//! * LRP-ε redistributes the target logit layer by layer in proportion to
//!   each input's share `w·x` of a unit's pre-activation, with a small
//!   signed stabilizer in the denominator.
//! * PatternAttribution back-projects the target logit through `w ⊙ a`,
//!   where `a` is a per-unit signal pattern estimated from held-out data
//!   (see [`learn_patterns`]).
//!
//! Max-pooling routes everything to the winning position and ReLU either
//! passes (LRP) or masks (PatternAttribution) the signal. Word-vector-space
//! maps are then summed over the vector dimension to give one score per
//! token.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    forward, ClassifierParams, EmbeddedSample, EmbeddedTriple, ForwardCache, Input, Prediction, SidePolicy,
};
use crate::nn::{dot, Tensor2D};
use crate::{Error, Result, Side};

pub const PATTERNS_MAGIC: &str = "mtdiag-patterns/1";

/// Stabilizer for LRP-ε outside of tests.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LrpEpsilon,
    PatternAttribution,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lrp_epsilon" => Ok(Method::LrpEpsilon),
            "pattern_attribution" => Ok(Method::PatternAttribution),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::LrpEpsilon => "lrp_epsilon",
            Method::PatternAttribution => "pattern_attribution",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetNeuron {
    #[default]
    Machine,
    Human,
}

impl TargetNeuron {
    /// Output index of this neuron for a triple whose machine text sits on
    /// `machine_side`.
    pub fn index(self, machine_side: Side) -> usize {
        match self {
            TargetNeuron::Machine => machine_side.index(),
            TargetNeuron::Human => machine_side.other().index(),
        }
    }
}

/// Contributions in word-vector space, one `L × d` matrix per input.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    pub left: Tensor2D,
    pub source: Tensor2D,
    pub right: Tensor2D,
    pub target_neuron: TargetNeuron,
}

impl RelevanceMap {
    fn zeros_like(triple: &EmbeddedTriple, target_neuron: TargetNeuron) -> Self {
        let z = |i: Input| {
            let m = &triple.input(i).matrix;
            Tensor2D::zeros(m.rows(), m.cols())
        };
        RelevanceMap {
            left: z(Input::Left),
            source: z(Input::Source),
            right: z(Input::Right),
            target_neuron,
        }
    }

    pub fn input(&self, input: Input) -> &Tensor2D {
        match input {
            Input::Left => &self.left,
            Input::Source => &self.source,
            Input::Right => &self.right,
        }
    }

    fn input_mut(&mut self, input: Input) -> &mut Tensor2D {
        match input {
            Input::Left => &mut self.left,
            Input::Source => &mut self.source,
            Input::Right => &mut self.right,
        }
    }

    pub fn total(&self) -> f64 {
        self.left.sum() + self.source.sum() + self.right.sum()
    }
}

/// Relevance recorded at the pooling boundary: what the dense layer hands
/// to each pooled feature, and what each conv bank receives per position.
#[derive(Debug, Clone, PartialEq)]
pub struct LrpTrace {
    pub features: Vec<f64>,
    /// Indexed by input, then bank; `positions × channels`.
    pub conv_outputs: [Vec<Tensor2D>; 3],
}

fn stabilize(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

fn target_index(triple: &EmbeddedTriple, target: TargetNeuron) -> usize {
    target.index(triple.machine_side)
}

fn check_cache(params: &ClassifierParams, cache: &ForwardCache) -> Result<()> {
    let ok = cache.features.len() == params.config.feature_count()
        && Input::ALL
            .iter()
            .all(|&i| cache.banks[i.index()].len() == params.config.widths.len());
    if ok {
        Ok(())
    } else {
        Err(Error::MissingCache)
    }
}

/// LRP-ε from the target logit down to the three input matrices.
pub fn lrp_epsilon(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    cache: &ForwardCache,
    target: TargetNeuron,
    eps: f64,
) -> Result<RelevanceMap> {
    lrp_epsilon_traced(triple, params, cache, target, eps).map(|(m, _)| m)
}

pub fn lrp_epsilon_traced(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    cache: &ForwardCache,
    target: TargetNeuron,
    eps: f64,
) -> Result<(RelevanceMap, LrpTrace)> {
    check_cache(params, cache)?;
    let j = target_index(triple, target);
    let relevance_out = cache.logits[j];
    let denom = stabilize(cache.logits[j], eps);
    let w = params.dense.weights.row(j);
    let features: Vec<f64> = cache
        .features
        .iter()
        .zip(w)
        .map(|(x, w)| w * x / denom * relevance_out)
        .collect();

    let mut map = RelevanceMap::zeros_like(triple, target);
    let mut conv_outputs: [Vec<Tensor2D>; 3] = Default::default();
    for input in Input::ALL {
        let x = &triple.input(input).matrix;
        for (bank, conv) in params.branch(input).convs.iter().enumerate() {
            let cc = cache.bank(input, bank);
            let offset = params.feature_offset(input, bank);
            let mut routed = Tensor2D::zeros(cc.pre.rows(), conv.channels());
            for c in 0..conv.channels() {
                let r = features[offset + c];
                let pos = cc.pool.argmax[c];
                routed.set(pos, c, r);
                if r == 0.0 {
                    continue;
                }
                let z_total = stabilize(cc.pre.get(pos, c), eps);
                let window = x.rows_slice(pos, conv.width);
                let dst = map.input_mut(input).rows_slice_mut(pos, conv.width);
                for ((out, &wk), &xk) in dst.iter_mut().zip(conv.weights.row(c)).zip(window) {
                    *out += wk * xk / z_total * r;
                }
            }
            conv_outputs[input.index()].push(routed);
        }
    }
    Ok((map, LrpTrace { features, conv_outputs }))
}

/// Back-projects `seed` placed on the target logit through per-unit
/// effective weights, masking channels whose winning pre-activation is not
/// positive. With the plain weights this is `seed` times the input
/// gradient of the target logit.
fn backproject(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    cache: &ForwardCache,
    target: TargetNeuron,
    dense_eff: &Tensor2D,
    conv_eff: &[Vec<Tensor2D>; 3],
) -> Result<RelevanceMap> {
    check_cache(params, cache)?;
    let j = target_index(triple, target);
    let seed = cache.logits[j];
    let signal: Vec<f64> = dense_eff.row(j).iter().map(|w| w * seed).collect();

    let mut map = RelevanceMap::zeros_like(triple, target);
    for input in Input::ALL {
        for (bank, conv) in params.branch(input).convs.iter().enumerate() {
            let cc = cache.bank(input, bank);
            let offset = params.feature_offset(input, bank);
            let eff = &conv_eff[input.index()][bank];
            for c in 0..conv.channels() {
                let pos = cc.pool.argmax[c];
                if cc.pre.get(pos, c) <= 0.0 {
                    continue;
                }
                let s = signal[offset + c];
                let dst = map.input_mut(input).rows_slice_mut(pos, conv.width);
                for (out, &we) in dst.iter_mut().zip(eff.row(c)) {
                    *out += we * s;
                }
            }
        }
    }
    Ok(map)
}

/// Logit-seeded gradient back-pass through the unmodified weights.
pub fn gradient_backprojection(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    cache: &ForwardCache,
    target: TargetNeuron,
) -> Result<RelevanceMap> {
    let conv_eff = Input::ALL.map(|i| {
        params
            .branch(i)
            .convs
            .iter()
            .map(|c| c.weights.clone())
            .collect::<Vec<_>>()
    });
    backproject(triple, params, cache, target, &params.dense.weights, &conv_eff)
}

/// Signal patterns for every linear unit, shaped like the weights they
/// belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub magic: String,
    /// Fingerprint of the parameters the patterns were estimated for.
    pub params_fingerprint: String,
    /// Indexed by input, then bank; row `c` is the pattern of filter `c`.
    pub conv: [Vec<Tensor2D>; 3],
    pub dense: Tensor2D,
    /// Units that fell back to their own weights for lack of data.
    pub fallback_units: usize,
    pub estimated_units: usize,
}

impl PatternSet {
    /// Patterns equal to one everywhere, which turns PatternAttribution
    /// into the logit-seeded gradient.
    pub fn ones(params: &ClassifierParams) -> Self {
        let ones_like = |t: &Tensor2D| {
            Tensor2D::from_vec(t.rows(), t.cols(), vec![1.0; t.rows() * t.cols()]).expect("shape")
        };
        PatternSet {
            magic: PATTERNS_MAGIC.to_owned(),
            params_fingerprint: params_fingerprint(params),
            conv: Input::ALL.map(|i| params.branch(i).convs.iter().map(|c| ones_like(&c.weights)).collect()),
            dense: ones_like(&params.dense.weights),
            fallback_units: 0,
            estimated_units: 0,
        }
    }

    fn check_shapes(&self, params: &ClassifierParams) -> Result<()> {
        let same = |a: &Tensor2D, b: &Tensor2D| a.rows() == b.rows() && a.cols() == b.cols();
        if !same(&self.dense, &params.dense.weights) {
            return Err(Error::PatternMismatch("dense pattern shape".into()));
        }
        for input in Input::ALL {
            let convs = &params.branch(input).convs;
            let pats = &self.conv[input.index()];
            if pats.len() != convs.len() || !pats.iter().zip(convs).all(|(p, c)| same(p, &c.weights)) {
                return Err(Error::PatternMismatch(format!("{input:?} conv pattern shape")));
            }
        }
        Ok(())
    }

    /// Shape and fingerprint check against a parameter set.
    pub fn verify(&self, params: &ClassifierParams) -> Result<()> {
        if self.magic != PATTERNS_MAGIC {
            return Err(Error::PatternMismatch(format!("unknown format {:?}", self.magic)));
        }
        self.check_shapes(params)?;
        if self.params_fingerprint != params_fingerprint(params) {
            return Err(Error::PatternMismatch("parameter fingerprint differs".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_vec(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// SHA-256 over the little-endian bytes of every parameter tensor.
pub fn params_fingerprint(params: &ClassifierParams) -> String {
    let mut bytes = Vec::with_capacity(params.parameter_count() * 8);
    for t in params.tensors() {
        for v in t {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    crate::checksum(&bytes)
}

/// Streaming covariance between a unit's input vector and its output,
/// updated one observation at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEstimator {
    count: u64,
    mean_x: Vec<f64>,
    mean_y: f64,
    comoment: Vec<f64>,
}

impl PatternEstimator {
    pub fn new(len: usize) -> Self {
        PatternEstimator {
            count: 0,
            mean_x: vec![0.0; len],
            mean_y: 0.0,
            comoment: vec![0.0; len],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.mean_x.len());
        self.count += 1;
        let n = self.count as f64;
        let dy = y - self.mean_y;
        self.mean_y += dy / n;
        let dy_new = y - self.mean_y;
        for ((m, c), &xi) in self.mean_x.iter_mut().zip(self.comoment.iter_mut()).zip(x) {
            let dx = xi - *m;
            *m += dx / n;
            *c += dx * dy_new;
        }
    }

    /// `cov(x, y) / (wᵀ cov(x, y))`, or `None` when there is no usable
    /// covariance.
    pub fn estimate(&self, weights: &[f64]) -> Option<Vec<f64>> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        let cov: Vec<f64> = self.comoment.iter().map(|c| c / n).collect();
        let denom = dot(weights, &cov);
        let scale = cov.iter().map(|c| c.abs()).fold(0.0, f64::max) * weights.iter().map(|w| w.abs()).sum::<f64>();
        if !denom.is_finite() || denom.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        Some(cov.iter().map(|c| c / denom).collect())
    }
}

fn fill_patterns(rows: &mut Tensor2D, weights: &Tensor2D, estimators: &[PatternEstimator]) -> (usize, usize) {
    let (mut estimated, mut fallback) = (0, 0);
    for (c, est) in estimators.iter().enumerate() {
        match est.estimate(weights.row(c)) {
            Some(a) => {
                rows.row_mut(c).copy_from_slice(&a);
                estimated += 1;
            }
            None => {
                rows.row_mut(c).copy_from_slice(weights.row(c));
                fallback += 1;
            }
        }
    }
    (estimated, fallback)
}

/// Estimates a pattern for every linear unit from the pattern split, with
/// the machine translation on the right. Conv filters learn from every
/// window position where they are active (pre-activation > 0); the dense
/// rows learn from every sample. Units without data keep `a = w`.
pub fn learn_patterns(samples: &[EmbeddedSample], params: &ClassifierParams) -> Result<PatternSet> {
    if samples.is_empty() {
        return Err(Error::Empty("pattern split"));
    }
    let cfg = &params.config;
    let mut conv_est: [Vec<Vec<PatternEstimator>>; 3] = Input::ALL.map(|i| {
        params
            .branch(i)
            .convs
            .iter()
            .map(|c| vec![PatternEstimator::new(c.weights.cols()); c.channels()])
            .collect()
    });
    let mut dense_est = vec![PatternEstimator::new(cfg.feature_count()); 2];

    let sides = SidePolicy::FixedRight.sides(samples.len());
    const BLOCK: usize = 64;
    for (block, block_sides) in samples.chunks(BLOCK).zip(sides.chunks(BLOCK)) {
        let triples: Vec<EmbeddedTriple> = block.iter().zip(block_sides).map(|(s, &side)| s.triple(side)).collect();
        #[cfg(feature = "parallel")]
        let caches: Vec<Result<ForwardCache>> = {
            use rayon::prelude::*;
            triples.par_iter().map(|t| forward(t, params).map(|(_, c)| c)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let caches: Vec<Result<ForwardCache>> = triples.iter().map(|t| forward(t, params).map(|(_, c)| c)).collect();

        for (triple, cache) in triples.iter().zip(caches) {
            let cache = cache?;
            for (j, est) in dense_est.iter_mut().enumerate() {
                est.update(&cache.features, cache.logits[j]);
            }
            for input in Input::ALL {
                let x = &triple.input(input).matrix;
                for (bank, conv) in params.branch(input).convs.iter().enumerate() {
                    let pre = &cache.bank(input, bank).pre;
                    let ests = &mut conv_est[input.index()][bank];
                    for t in 0..pre.rows() {
                        let window = x.rows_slice(t, conv.width);
                        for (c, est) in ests.iter_mut().enumerate() {
                            let y = pre.get(t, c);
                            if y > 0.0 {
                                est.update(window, y);
                            }
                        }
                    }
                }
            }
        }
    }

    let (mut estimated, mut fallback) = (0, 0);
    let mut dense = params.dense.weights.clone();
    let (e, f) = fill_patterns(&mut dense, &params.dense.weights, &dense_est);
    estimated += e;
    fallback += f;
    let mut conv: [Vec<Tensor2D>; 3] = Default::default();
    for input in Input::ALL {
        for (bank, layer) in params.branch(input).convs.iter().enumerate() {
            let mut rows = layer.weights.clone();
            let (e, f) = fill_patterns(&mut rows, &layer.weights, &conv_est[input.index()][bank]);
            estimated += e;
            fallback += f;
            conv[input.index()].push(rows);
        }
    }
    Ok(PatternSet {
        magic: PATTERNS_MAGIC.to_owned(),
        params_fingerprint: params_fingerprint(params),
        conv,
        dense,
        fallback_units: fallback,
        estimated_units: estimated,
    })
}

fn hadamard(a: &Tensor2D, b: &Tensor2D) -> Tensor2D {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).collect();
    Tensor2D::from_vec(a.rows(), a.cols(), data).expect("equal shapes")
}

/// PatternAttribution: the logit-seeded back-pass with every weight vector
/// replaced by `w ⊙ a`. Only shapes are checked here; use
/// [`PatternSet::verify`] once per parameter set for the fingerprint.
pub fn pattern_attribution(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    patterns: &PatternSet,
    cache: &ForwardCache,
    target: TargetNeuron,
) -> Result<RelevanceMap> {
    patterns.check_shapes(params)?;
    let dense_eff = hadamard(&params.dense.weights, &patterns.dense);
    let conv_eff = Input::ALL.map(|i| {
        params
            .branch(i)
            .convs
            .iter()
            .zip(&patterns.conv[i.index()])
            .map(|(c, a)| hadamard(&c.weights, a))
            .collect::<Vec<_>>()
    });
    backproject(triple, params, cache, target, &dense_eff, &conv_eff)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    pub source: Vec<(String, f64)>,
    pub left: Vec<(String, f64)>,
    pub right: Vec<(String, f64)>,
}

impl TokenScores {
    pub fn input(&self, input: Input) -> &[(String, f64)] {
        match input {
            Input::Left => &self.left,
            Input::Source => &self.source,
            Input::Right => &self.right,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.source, &self.left, &self.right]
            .into_iter()
            .flatten()
            .map(|(_, s)| s.abs())
            .fold(0.0, f64::max)
    }
}

/// Token-level explanation of one sample. Positive scores are evidence for
/// the machine, negative for the human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub sample_id: u64,
    pub method: Method,
    pub target_neuron: TargetNeuron,
    pub machine_side: Side,
    /// (left neuron, right neuron)
    pub logits: [f64; 2],
    pub softmax: [f64; 2],
    pub logit_machine: f64,
    pub softmax_machine: f64,
    pub token_scores: TokenScores,
    pub checkpoint_checksum: String,
    #[serde(default)]
    pub config_checksum: Option<String>,
}

impl Explanation {
    pub fn prediction(&self) -> Prediction {
        Prediction::from_logits(self.sample_id, self.logits, self.machine_side)
    }
}

/// Sums each token's relevance over the vector dimension and drops padding.
///
/// Scores are oriented so that positive always means machine evidence:
/// explaining the machine neuron, the human-side translation is negated;
/// explaining the human neuron, the machine-side translation and the source
/// are negated.
pub fn project_to_tokens(
    map: &RelevanceMap,
    triple: &EmbeddedTriple,
    prediction: &Prediction,
    method: Method,
    checkpoint_checksum: &str,
) -> Explanation {
    let human_side = Input::of_side(triple.machine_side.other());
    let machine_side = Input::of_side(triple.machine_side);
    let flip = |input: Input| match map.target_neuron {
        TargetNeuron::Machine => input == human_side,
        TargetNeuron::Human => input == machine_side || input == Input::Source,
    };
    let scores = |input: Input| -> Vec<(String, f64)> {
        let tm = triple.input(input);
        let rel = map.input(input);
        let sign = if flip(input) { -1.0 } else { 1.0 };
        (0..tm.valid_length)
            .map(|r| {
                let s: f64 = rel.row(r).iter().sum();
                (tm.tokens[r].clone(), sign * s)
            })
            .collect()
    };
    Explanation {
        sample_id: triple.sample_id,
        method,
        target_neuron: map.target_neuron,
        machine_side: triple.machine_side,
        logits: prediction.logits,
        softmax: prediction.softmax,
        logit_machine: prediction.logit_machine(),
        softmax_machine: prediction.softmax_machine(),
        token_scores: TokenScores {
            source: scores(Input::Source),
            left: scores(Input::Left),
            right: scores(Input::Right),
        },
        checkpoint_checksum: checkpoint_checksum.to_owned(),
        config_checksum: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplainOptions {
    pub method: Method,
    pub target: TargetNeuron,
    pub epsilon: f64,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            method: Method::LrpEpsilon,
            target: TargetNeuron::Machine,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Forward pass, attribution with the selected method, and projection.
pub fn explain(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    patterns: Option<&PatternSet>,
    opts: &ExplainOptions,
    checkpoint_checksum: &str,
) -> Result<(RelevanceMap, Explanation)> {
    let (prediction, cache) = forward(triple, params)?;
    let map = match opts.method {
        Method::LrpEpsilon => lrp_epsilon(triple, params, &cache, opts.target, opts.epsilon)?,
        Method::PatternAttribution => {
            let patterns = patterns.ok_or_else(|| Error::PatternMismatch("no pattern set loaded".into()))?;
            pattern_attribution(triple, params, patterns, &cache, opts.target)?
        }
    };
    let explanation = project_to_tokens(&map, triple, &prediction, opts.method, checkpoint_checksum);
    Ok((map, explanation))
}

/// Explains every sample with the machine translation on the right, in
/// input order.
pub fn explain_corpus(
    samples: &[EmbeddedSample],
    params: &ClassifierParams,
    patterns: Option<&PatternSet>,
    opts: &ExplainOptions,
    checkpoint_checksum: &str,
) -> Result<Vec<Explanation>> {
    if let (Method::PatternAttribution, Some(p)) = (opts.method, patterns) {
        p.verify(params)?;
    }
    let run = |s: &EmbeddedSample| {
        explain(&s.triple(Side::Right), params, patterns, opts, checkpoint_checksum).map(|(_, e)| e)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    samples.iter().map(run).collect()
}

/// One explanation per line.
pub fn write_explanations(path: impl AsRef<Path>, explanations: &[Explanation]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for e in explanations {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_explanations(path: impl AsRef<Path>) -> Result<Vec<Explanation>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

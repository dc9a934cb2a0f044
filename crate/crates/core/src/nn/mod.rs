//! Dense tensors, the layer kinds the discriminator needs, hand-written
//! gradients and an adaptive-moment optimizer.

mod backprop;
mod optim;

pub use backprop::{backward_and_step, batch_gradients};
pub use optim::{Adam, AdamConfig};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor2D { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor2D {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `n` consecutive rows starting at `start`, as one flat slice.
    pub fn rows_slice(&self, start: usize, n: usize) -> &[f64] {
        &self.data[start * self.cols..(start + n) * self.cols]
    }

    pub fn rows_slice_mut(&mut self, start: usize, n: usize) -> &mut [f64] {
        &mut self.data[start * self.cols..(start + n) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv1d,
    Dense,
}

/// A bank of same-width 1-D convolution filters over `d`-dimensional rows.
/// Row `c` of `weights` is filter `c` flattened over its `width × d` window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    pub width: usize,
    pub dimension: usize,
    pub weights: Tensor2D,
    pub bias: Vec<f64>,
}

impl Conv1dLayer {
    pub fn zeros(width: usize, dimension: usize, channels: usize) -> Self {
        Conv1dLayer {
            width,
            dimension,
            weights: Tensor2D::zeros(channels, width * dimension),
            bias: vec![0.0; channels],
        }
    }

    /// He-normal weights, zero bias.
    pub fn init<R: Rng + ?Sized>(width: usize, dimension: usize, channels: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(width, dimension, channels);
        let fan_in = (width * dimension) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("valid sigma");
        for w in layer.weights.as_mut_slice() {
            *w = normal.sample(rng);
        }
        layer
    }

    pub fn channels(&self) -> usize {
        self.weights.rows()
    }

    /// Number of window positions over an input of `len` rows.
    pub fn positions(&self, len: usize) -> usize {
        len + 1 - self.width
    }

    /// Pre-activations (positions × channels). The activation is ReLU and is
    /// applied by the caller; see [`relu`] and [`max_pool`].
    pub fn forward(&self, input: &Tensor2D) -> Result<Tensor2D> {
        if input.cols() != self.dimension {
            return Err(Error::Shape(format!(
                "conv expects rows of width {}, got {}",
                self.dimension,
                input.cols()
            )));
        }
        if self.width == 0 || self.width > input.rows() {
            return Err(Error::Config(format!(
                "filter width {} does not fit {} rows",
                self.width,
                input.rows()
            )));
        }
        let positions = self.positions(input.rows());
        let mut pre = Tensor2D::zeros(positions, self.channels());
        for t in 0..positions {
            let window = input.rows_slice(t, self.width);
            let out = pre.row_mut(t);
            for (c, o) in out.iter_mut().enumerate() {
                *o = dot(self.weights.row(c), window) + self.bias[c];
            }
        }
        Ok(pre)
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Per-channel maximum over positions with the winning position.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Channel-wise max over the rows of `map`; ties go to the lowest position.
pub fn max_pool(map: &Tensor2D) -> MaxPool {
    assert!(map.rows() > 0, "max_pool needs at least one position");
    let mut values = map.row(0).to_vec();
    let mut argmax = vec![0; map.cols()];
    for t in 1..map.rows() {
        for (c, &v) in map.row(t).iter().enumerate() {
            if v > values[c] {
                values[c] = v;
                argmax[c] = t;
            }
        }
    }
    MaxPool { values, argmax }
}

/// Fully connected layer, `outputs × inputs` weights, no activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor2D,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        DenseLayer {
            weights: Tensor2D::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-normal weights, zero bias.
    pub fn init<R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(outputs, inputs);
        let sigma = (2.0 / (inputs + outputs) as f64).sqrt();
        let normal = Normal::new(0.0, sigma).expect("valid sigma");
        for w in layer.weights.as_mut_slice() {
            *w = normal.sample(rng);
        }
        layer
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.inputs() {
            return Err(Error::Shape(format!(
                "dense expects {} features, got {}",
                self.inputs(),
                features.len()
            )));
        }
        Ok((0..self.outputs())
            .map(|j| dot(self.weights.row(j), features) + self.bias[j])
            .collect())
    }
}

/// Exp-normalized probabilities, shifted by the maximum logit.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[label]`, computed with log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2D {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor2D::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_input_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1dLayer::init(3, 4, 5, &mut rng);
        let pre = conv.forward(&Tensor2D::zeros(6, 4)).unwrap();
        assert_eq!(pre.rows(), 4);
        assert!(pre.as_slice().iter().all(|&v| relu(v) == 0.0));
    }

    #[test]
    fn conv_hand_sum() {
        let mut conv = Conv1dLayer::zeros(3, 1, 1);
        conv.weights.as_mut_slice().copy_from_slice(&[1.0, 1.0, 1.0]);
        let input = Tensor2D::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let pre = conv.forward(&input).unwrap();
        assert_eq!(pre.as_slice(), &[6.0, 9.0]);
    }

    #[test]
    fn conv_shape_errors() {
        let conv = Conv1dLayer::zeros(3, 2, 1);
        assert!(matches!(conv.forward(&Tensor2D::zeros(5, 3)), Err(Error::Shape(_))));
        assert!(matches!(conv.forward(&Tensor2D::zeros(2, 2)), Err(Error::Config(_))));
    }

    #[test]
    fn conv_matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let (len, d, w, ch) = (7, 3, 3, 4);
            let mut conv = Conv1dLayer::init(w, d, ch, &mut rng);
            conv.bias = (0..ch).map(|_| rng.random_range(-0.5..0.5)).collect();
            let input = random_tensor(&mut rng, len, d);
            let pre = conv.forward(&input).unwrap();
            for t in 0..len - w + 1 {
                for c in 0..ch {
                    let mut acc = conv.bias[c];
                    for k in 0..w {
                        for j in 0..d {
                            acc += conv.weights.get(c, k * d + j) * input.get(t + k, j);
                        }
                    }
                    let got = pre.get(t, c);
                    assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn max_pool_rules() {
        let single = Tensor2D::from_vec(1, 2, vec![0.5, -1.0]).unwrap();
        let p = max_pool(&single);
        assert_eq!(p.values, vec![0.5, -1.0]);
        assert_eq!(p.argmax, vec![0, 0]);

        let tie = Tensor2D::from_vec(3, 1, vec![3.0, 7.0, 7.0]).unwrap();
        let p = max_pool(&tie);
        assert_eq!((p.values[0], p.argmax[0]), (7.0, 1));
    }

    #[test]
    fn max_pool_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let map = random_tensor(&mut rng, 9, 5);
        let p = max_pool(&map);
        for c in 0..5 {
            let col: Vec<f64> = (0..9).map(|t| map.get(t, c)).collect();
            let best = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let first = col.iter().position(|&v| v == best).unwrap();
            assert_eq!((p.values[c], p.argmax[c]), (best, first));
        }
    }

    #[test]
    fn dense_rules() {
        let mut dense = DenseLayer::zeros(2, 3);
        dense.bias = vec![1.0, -1.0];
        assert_eq!(dense.forward(&[0.0; 3]).unwrap(), vec![1.0, -1.0]);

        dense.weights = Tensor2D::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(dense.forward(&[2.0, 3.0, 4.0]).unwrap(), vec![7.0, 2.0]);
        assert!(dense.forward(&[1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dense = DenseLayer::init(2, 11, &mut rng);
        let x: Vec<f64> = (0..11).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = dense.forward(&x).unwrap();
        for j in 0..2 {
            let mut acc = dense.bias[j];
            for i in 0..11 {
                acc += dense.weights.get(j, i) * x[i];
            }
            assert!((got[j] - acc).abs() <= 1e-12 * acc.abs().max(1.0));
        }
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        // e^2 / (e^2 + 1) evaluated to 30 digits: 0.880797077977882444...
        let p = softmax(&[2.0, 0.0]);
        assert!((p[0] - 0.880_797_077_977_882_4).abs() < 1e-15);
        assert!((p[1] - 0.119_202_922_022_117_56).abs() < 1e-15);
        assert!(softmax(&[1000.0, 0.0])[0].is_finite());
    }

    #[test]
    fn cross_entropy_matches_log_softmax() {
        let l = [0.3, -1.2];
        let p = softmax(&l);
        assert!((cross_entropy(&l, 1) + p[1].ln()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            a in -50.0f64..50.0, b in -50.0f64..50.0, c in -100.0f64..100.0
        ) {
            let p = softmax(&[a, b]);
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let q = softmax(&[a + c, b + c]);
            prop_assert!((p[0] - q[0]).abs() <= 1e-12);
        }

        #[test]
        fn perturbing_a_loser_leaves_pool_unchanged(
            vals in proptest::collection::vec(-5.0f64..5.0, 3..10), frac in 0.0f64..0.99
        ) {
            let map = Tensor2D::from_vec(vals.len(), 1, vals.clone()).unwrap();
            let p = max_pool(&map);
            let mut sorted = vals.clone();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let gap = sorted[0] - sorted[1];
            prop_assume!(gap > 0.0);
            let loser = (0..vals.len()).find(|&t| t != p.argmax[0]).unwrap();
            let mut bumped = vals.clone();
            // keep the perturbed value strictly below the max
            bumped[loser] += frac * (sorted[0] - vals[loser]);
            let q = max_pool(&Tensor2D::from_vec(vals.len(), 1, bumped).unwrap());
            prop_assert_eq!(p, q);
        }
    }
}

use mtdiag_core::classifier::{forward, ClassifierParams, EmbeddedTriple, ModelConfig};
use mtdiag_core::embed::TokenMatrix;
use mtdiag_core::nn::{batch_gradients, cross_entropy};
use mtdiag_core::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ModelConfig {
    ModelConfig {
        max_len: 7,
        dimension: 4,
        widths: vec![2, 3],
        filters_per_width: 3,
        bias_free: false,
    }
}

// Full-length random rows: padding would create tied all-zero windows.
fn matrix(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> TokenMatrix {
    let mut m = TokenMatrix::zeros(cfg.max_len, cfg.dimension);
    for r in 0..cfg.max_len {
        for v in m.matrix.row_mut(r) {
            *v = rng.random_range(-1.0..1.0);
        }
        m.tokens.push(format!("t{r}"));
    }
    m.valid_length = cfg.max_len;
    m
}

fn batch(rng: &mut ChaCha8Rng, cfg: &ModelConfig, n: usize) -> Vec<EmbeddedTriple> {
    (0..n)
        .map(|i| EmbeddedTriple {
            left: matrix(rng, cfg),
            source: matrix(rng, cfg),
            right: matrix(rng, cfg),
            machine_side: if rng.random_bool(0.5) { Side::Left } else { Side::Right },
            sample_id: i as u64,
        })
        .collect()
}

fn mean_loss(batch: &[EmbeddedTriple], params: &ClassifierParams) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|t| {
            let (_, cache) = forward(t, params).unwrap();
            cross_entropy(&cache.logits, t.machine_side.index())
        })
        .sum();
    total / batch.len() as f64
}

#[test]
fn analytic_gradients_match_central_differences() {
    let cfg = config();
    let h = 1e-5;
    let mut checked = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut params = ClassifierParams::init(&cfg, seed).unwrap();
        // nonzero biases so their gradients are exercised too
        for b in params.dense.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
        let data = batch(&mut rng, &cfg, 5);
        let (_, grads) = batch_gradients(&data, &params).unwrap();
        let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
        for (t, g) in analytic.iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let mut plus = params.clone();
                plus.tensors_mut()[t][i] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[t][i] -= h;
                let numeric = (mean_loss(&data, &plus) - mean_loss(&data, &minus)) / (2.0 * h);
                let tol = (1e-4 * a.abs().max(numeric.abs())).max(1e-7);
                assert!(
                    (a - numeric).abs() <= tol,
                    "seed {seed} tensor {t} index {i}: analytic {a} numeric {numeric}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 20 * 100);
}

#[test]
fn bias_free_gradients_leave_biases_alone() {
    let cfg = ModelConfig {
        bias_free: true,
        ..config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut params = ClassifierParams::init(&cfg, 3).unwrap();
    params.zero_biases();
    let data = batch(&mut rng, &cfg, 4);
    let (_, grads) = batch_gradients(&data, &params).unwrap();
    assert!(grads.dense.bias.iter().all(|&b| b == 0.0));
    for conv in &grads.conv_left.convs {
        assert!(conv.bias.iter().all(|&b| b == 0.0));
    }
    assert!(grads.dense.weights.as_slice().iter().any(|&w| w != 0.0));
}

#[test]
fn batch_gradient_is_mean_of_single_gradients() {
    let cfg = config();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = ClassifierParams::init(&cfg, 9).unwrap();
    let data = batch(&mut rng, &cfg, 19);
    let (loss, grads) = batch_gradients(&data, &params).unwrap();
    let mut acc = ClassifierParams::zeros(&cfg).unwrap();
    let mut loss_sum = 0.0;
    for t in &data {
        let (l, g) = batch_gradients(std::slice::from_ref(t), &params).unwrap();
        loss_sum += l;
        acc.add_scaled(&g, 1.0 / data.len() as f64);
    }
    assert!((loss - loss_sum / data.len() as f64).abs() < 1e-12);
    for (a, b) in grads.tensors().iter().zip(acc.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

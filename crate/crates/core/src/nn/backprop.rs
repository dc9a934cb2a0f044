use crate::classifier::{forward, ClassifierParams, EmbeddedTriple, Input};
use crate::nn::{cross_entropy, softmax, Adam};
use crate::{Error, Result};

/// Samples per sequential accumulation chunk. Chunks may run in parallel,
/// but are always combined in index order so sums do not depend on the
/// thread count.
const CHUNK: usize = 8;

/// Adds the gradient of `scale * CE(triple)` into `grads` and returns the
/// unscaled loss.
fn accumulate(
    triple: &EmbeddedTriple,
    params: &ClassifierParams,
    grads: &mut ClassifierParams,
    scale: f64,
) -> Result<f64> {
    let (_, cache) = forward(triple, params)?;
    let label = triple.machine_side.index();
    let loss = cross_entropy(&cache.logits, label);
    let p = softmax(&cache.logits);
    let dlogits = [
        scale * (p[0] - if label == 0 { 1.0 } else { 0.0 }),
        scale * (p[1] - if label == 1 { 1.0 } else { 0.0 }),
    ];

    let features = &cache.features;
    let f = features.len();
    let mut dfeatures = vec![0.0; f];
    for (j, &dl) in dlogits.iter().enumerate() {
        grads.dense.bias[j] += dl;
        let gw = grads.dense.weights.row_mut(j);
        for i in 0..f {
            gw[i] += dl * features[i];
        }
        let w = params.dense.weights.row(j);
        for i in 0..f {
            dfeatures[i] += w[i] * dl;
        }
    }

    for input in Input::ALL {
        let x = &triple.input(input).matrix;
        for (bank, conv) in params.branch(input).convs.iter().enumerate() {
            let cc = cache.bank(input, bank);
            let offset = params.feature_offset(input, bank);
            let gconv = &mut grads.branch_mut(input).convs[bank];
            for c in 0..conv.channels() {
                let pos = cc.pool.argmax[c];
                // ReLU subgradient is 0 at 0; max-pool passes only the winner.
                if cc.pre.get(pos, c) <= 0.0 {
                    continue;
                }
                let dpre = dfeatures[offset + c];
                gconv.bias[c] += dpre;
                let window = x.rows_slice(pos, conv.width);
                for (g, &xv) in gconv.weights.row_mut(c).iter_mut().zip(window) {
                    *g += dpre * xv;
                }
            }
        }
    }
    Ok(loss)
}

fn chunk_gradients(
    chunk: &[EmbeddedTriple],
    params: &ClassifierParams,
    scale: f64,
) -> Result<(f64, ClassifierParams)> {
    let mut grads = ClassifierParams::zeros(&params.config)?;
    let mut loss = 0.0;
    for t in chunk {
        loss += accumulate(t, params, &mut grads, scale)?;
    }
    Ok((loss, grads))
}

/// Mean cross-entropy over the batch and its exact gradient with respect to
/// every conv and dense parameter. Embeddings are constants.
pub fn batch_gradients(
    batch: &[EmbeddedTriple],
    params: &ClassifierParams,
) -> Result<(f64, ClassifierParams)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let scale = 1.0 / batch.len() as f64;

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(f64, ClassifierParams)>> = {
        use rayon::prelude::*;
        batch
            .par_chunks(CHUNK)
            .map(|c| chunk_gradients(c, params, scale))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(f64, ClassifierParams)>> = batch
        .chunks(CHUNK)
        .map(|c| chunk_gradients(c, params, scale))
        .collect();

    let mut total = 0.0;
    let mut grads: Option<ClassifierParams> = None;
    for part in parts {
        let (loss, g) = part?;
        total += loss;
        match grads.as_mut() {
            None => grads = Some(g),
            Some(acc) => acc.add_scaled(&g, 1.0),
        }
    }
    let mut grads = grads.expect("non-empty batch");
    if params.config.bias_free {
        grads.zero_biases();
    }
    Ok((total * scale, grads))
}

/// One optimizer step on the batch. Returns the batch's mean loss measured
/// before the update.
pub fn backward_and_step(
    batch: &[EmbeddedTriple],
    params: &mut ClassifierParams,
    optimizer: &mut Adam,
    batch_id: usize,
) -> Result<f64> {
    let (loss, grads) = batch_gradients(batch, params)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            batch: batch_id,
            loss,
        });
    }
    let grad_tensors = grads.tensors();
    let mut param_tensors = params.tensors_mut();
    optimizer.step(&mut param_tensors, &grad_tensors);
    Ok(loss)
}

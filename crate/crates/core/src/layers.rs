//! The layer zoo: embedding lookup, valid 1-d convolution, ReLU,
//! max-over-time pooling, dense projection, and softmax.
//!
//! Every forward is a pure function of its inputs; every backward is the
//! analytic gradient and is validated against central finite differences in
//! the test suite.

use crate::error::{Error, Result};
use crate::prob::ProbabilityVector;
use crate::tensor::{Parameter, Tensor};

/// Looks up rows of `table` ([V, D]) for each id; output is [L, D].
pub fn embedding_forward(table: &Parameter, ids: &[u32]) -> Result<Tensor> {
    let (vocab, dim) = table.value.dims2()?;
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (i, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= vocab {
            return Err(Error::data(format!(
                "token id {} at position {} outside vocabulary of size {}",
                id, i, vocab
            )));
        }
        let src = &table.value.values[id * dim..(id + 1) * dim];
        out.values[i * dim..(i + 1) * dim].copy_from_slice(src);
    }
    Ok(out)
}

/// Accumulates upstream gradients ([L, D]) into the table rows selected by
/// `ids`; repeated ids accumulate additively.
pub fn embedding_backward(table: &mut Parameter, ids: &[u32], d_out: &Tensor) {
    let dim = table.value.shape[1];
    for (i, &id) in ids.iter().enumerate() {
        let row = id as usize * dim;
        for d in 0..dim {
            table.grad.values[row + d] += d_out.values[i * dim + d];
        }
    }
}

/// Valid (no-padding) 1-d convolution over time.
///
/// input [L, D], kernel [F, w, D], bias [F] -> output [(L - w + 1), F] with
/// out[t, f] = bias[f] + sum_{j < w, d < D} input[t + j, d] * kernel[f, j, d].
pub fn conv1d_forward(input: &Tensor, kernel: &Parameter, bias: &Parameter) -> Result<Tensor> {
    let (len, dim) = input.dims2()?;
    let kshape = &kernel.value.shape;
    if kshape.len() != 3 || kshape[2] != dim {
        return Err(Error::shape(format!(
            "kernel shape {:?} incompatible with input [{}x{}]",
            kshape, len, dim
        )));
    }
    let (filters, width) = (kshape[0], kshape[1]);
    if bias.value.len() != filters {
        return Err(Error::shape(format!(
            "bias length {} != filter count {}",
            bias.value.len(),
            filters
        )));
    }
    if len < width {
        return Err(Error::shape(format!(
            "input length {} shorter than filter width {}; pad documents to the max filter width at tokenization time",
            len, width
        )));
    }
    let steps = len - width + 1;
    let mut out = Tensor::zeros(&[steps, filters]);
    for t in 0..steps {
        for f in 0..filters {
            let mut acc = bias.value.values[f];
            let kbase = f * width * dim;
            for j in 0..width {
                let irow = (t + j) * dim;
                let krow = kbase + j * dim;
                for d in 0..dim {
                    acc += input.values[irow + d] * kernel.value.values[krow + d];
                }
            }
            out.values[t * filters + f] = acc;
        }
    }
    Ok(out)
}

/// Analytic backward of [`conv1d_forward`]. Returns the gradient with respect
/// to the input and accumulates kernel/bias gradients.
pub fn conv1d_backward(
    input: &Tensor,
    kernel: &mut Parameter,
    bias: &mut Parameter,
    d_out: &Tensor,
) -> Tensor {
    let dim = input.shape[1];
    let filters = kernel.value.shape[0];
    let width = kernel.value.shape[1];
    let steps = d_out.shape[0];
    let mut d_input = Tensor::zeros(&input.shape);
    for t in 0..steps {
        for f in 0..filters {
            let g = d_out.values[t * filters + f];
            if g == 0.0 {
                continue;
            }
            bias.grad.values[f] += g;
            let kbase = f * width * dim;
            for j in 0..width {
                let irow = (t + j) * dim;
                let krow = kbase + j * dim;
                for d in 0..dim {
                    kernel.grad.values[krow + d] += g * input.values[irow + d];
                    d_input.values[irow + d] += g * kernel.value.values[krow + d];
                }
            }
        }
    }
    d_input
}

/// Elementwise max(x, 0).
pub fn relu_forward(input: &Tensor) -> Tensor {
    Tensor {
        shape: input.shape.clone(),
        values: input.values.iter().map(|&x| x.max(0.0)).collect(),
    }
}

/// Routes gradients through positive pre-activations only.
pub fn relu_backward(pre_activation: &Tensor, d_out: &Tensor) -> Tensor {
    let values = pre_activation
        .values
        .iter()
        .zip(&d_out.values)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor {
        shape: pre_activation.shape.clone(),
        values,
    }
}

/// Max over the time axis of a [T, F] map, recording per-feature argmax.
/// Ties break toward the lowest time index.
pub struct MaxPool {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

pub fn max_over_time(input: &Tensor) -> Result<MaxPool> {
    let (steps, features) = input.dims2()?;
    if steps == 0 {
        return Err(Error::shape("max-over-time on an empty feature map".to_string()));
    }
    let mut output = Tensor::zeros(&[features]);
    let mut argmax = vec![0usize; features];
    #[allow(clippy::needless_range_loop)]
    for f in 0..features {
        let mut best = input.values[f];
        let mut best_t = 0;
        for t in 1..steps {
            let v = input.values[t * features + f];
            if v > best {
                best = v;
                best_t = t;
            }
        }
        output.values[f] = best;
        argmax[f] = best_t;
    }
    Ok(MaxPool { output, argmax })
}

/// Backward of max pooling: gradient flows only to the argmax positions.
pub fn max_over_time_backward(input_shape: &[usize], pool: &MaxPool, d_out: &Tensor) -> Tensor {
    let features = input_shape[1];
    let mut d_input = Tensor::zeros(input_shape);
    for f in 0..features {
        d_input.values[pool.argmax[f] * features + f] += d_out.values[f];
    }
    d_input
}

/// Dense projection: out = weight([M, N]) . input([N]) + bias([M]).
pub fn dense_forward(input: &Tensor, weight: &Parameter, bias: &Parameter) -> Result<Tensor> {
    let (rows, cols) = weight.value.dims2()?;
    if input.len() != cols {
        return Err(Error::shape(format!(
            "dense input length {} != weight columns {}",
            input.len(),
            cols
        )));
    }
    if bias.value.len() != rows {
        return Err(Error::shape(format!(
            "dense bias length {} != weight rows {}",
            bias.value.len(),
            rows
        )));
    }
    let mut out = Tensor::zeros(&[rows]);
    for m in 0..rows {
        let wrow = m * cols;
        let mut acc = bias.value.values[m];
        for n in 0..cols {
            acc += weight.value.values[wrow + n] * input.values[n];
        }
        out.values[m] = acc;
    }
    Ok(out)
}

/// Analytic backward of [`dense_forward`]; returns the input gradient and
/// accumulates weight/bias gradients.
pub fn dense_backward(
    input: &Tensor,
    weight: &mut Parameter,
    bias: &mut Parameter,
    d_out: &Tensor,
) -> Tensor {
    let rows = weight.value.shape[0];
    let cols = weight.value.shape[1];
    let mut d_input = Tensor::zeros(&input.shape);
    for m in 0..rows {
        let g = d_out.values[m];
        bias.grad.values[m] += g;
        let wrow = m * cols;
        for n in 0..cols {
            weight.grad.values[wrow + n] += g * input.values[n];
            d_input.values[n] += g * weight.value.values[wrow + n];
        }
    }
    d_input
}

/// Numerically stable softmax over a logit vector of length >= 2.
pub fn softmax(logits: &[f64]) -> Result<ProbabilityVector> {
    if logits.len() < 2 {
        return Err(Error::shape(format!(
            "softmax needs at least 2 logits, got {}",
            logits.len()
        )));
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &z) in logits.iter().enumerate() {
        if !z.is_finite() {
            return Err(Error::numeric(format!("non-finite logit {} at index {}", z, i)));
        }
        if z > max {
            max = z;
        }
    }
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbabilityVector::new(exps.iter().map(|&e| e / sum).collect())
}

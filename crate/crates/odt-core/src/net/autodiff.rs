//! Forward evaluation, loss, and exact backpropagation.
//!
//! The network is small enough that a hand-derived backward pass is clearer
//! and faster than a general autodiff tape: the layer sequence is fixed, so
//! each forward pass records exactly the intermediates its mirror-image
//! backward pass needs (layer inputs, pre-activation signs, pooling argmax
//! positions, dropout masks). The loss gradient enters the chain in fused
//! form — for sigmoid followed by binary cross-entropy, dL/dlogit collapses
//! to `p − y`, which sidesteps the catastrophic cancellation both factors
//! have on their own.


use crate::error::{OdtError, Result};
use crate::net::layers::{
    adaptive_max_pool_1, conv2d, conv2d_backward, dropout_mask, linear, linear_backward,
    max_pool2, max_pool2_backward, relu, sigmoid,
};
use crate::net::params::{Gradients, NetParams};
use crate::net::tensor::Tensor;
use crate::seed::derive_rng;

/// Probabilities are clamped to this range inside the loss so a saturated
/// sigmoid cannot produce an infinite cross-entropy.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

// Tag separating dropout draws from the other derived streams.
const TAG_DROPOUT: u64 = 14;

/// Whether a forward pass samples dropout (training) or runs the exact
/// deterministic function (evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Train,
    Eval,
}

/// Everything one forward pass records for the backward pass, plus the
/// prediction itself.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input tensor handed to each conv block (post-pool output of the
    /// previous block; index 0 is the network input).
    pub conv_inputs: Vec<Tensor>,
    /// Each conv block's output before ReLU; its sign gates the backward
    /// pass and its shape is the unpooling target.
    pub conv_pre_relu: Vec<Tensor>,
    /// Argmax positions for the 2×2 pools after blocks 0..n−2.
    pub pool_argmax: Vec<Vec<usize>>,
    /// Argmax positions for the global pool after the last block.
    pub adaptive_argmax: Vec<usize>,
    /// Feature vector the head consumes.
    pub features: Vec<f64>,
    /// Post-dropout input vector of each linear layer.
    pub head_inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each linear layer (last entry is the logit).
    pub head_pre_act: Vec<Vec<f64>>,
    /// Dropout masks actually applied (None in eval mode or at rate 0).
    pub dropout_masks: Vec<Option<Vec<f64>>>,
    pub logit: f64,
    pub probability: f64,
}

/// Runs the network on one image.
///
/// `image` is `[channels, h, w]` with channels matching the input mode. Each
/// block is conv → ReLU → 2×2 max pool, except the last block, whose global
/// max pool makes the feature width independent of `h` and `w`; `h` and `w`
/// must stay even through every 2×2 pool. In `Train` mode, inverted dropout
/// with the given per-linear-layer rates is sampled from `dropout_seed`;
/// in `Eval` mode dropout is skipped entirely and the pass is a pure
/// function of (params, image).
pub fn forward_pass(
    params: &NetParams,
    image: &Tensor,
    mode: RunMode,
    dropout_rates: &[f64],
    dropout_seed: u64,
) -> Result<ForwardCache> {
    if image.shape().len() != 3 || image.shape()[0] != params.input_mode.channels() {
        return Err(OdtError::validation(format!(
            "input shape {:?} does not provide {} channels",
            image.shape(),
            params.input_mode.channels()
        )));
    }
    if mode == RunMode::Train {
        if dropout_rates.len() != params.linears.len() {
            return Err(OdtError::validation(format!(
                "{} dropout rates for {} linear layers",
                dropout_rates.len(),
                params.linears.len()
            )));
        }
        if dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(OdtError::validation(
                "dropout rates must lie in [0, 1)".to_string(),
            ));
        }
    }

    let n_convs = params.convs.len();
    let mut cache = ForwardCache {
        conv_inputs: Vec::with_capacity(n_convs),
        conv_pre_relu: Vec::with_capacity(n_convs),
        pool_argmax: Vec::with_capacity(n_convs.saturating_sub(1)),
        adaptive_argmax: Vec::new(),
        features: Vec::new(),
        head_inputs: Vec::with_capacity(params.linears.len()),
        head_pre_act: Vec::with_capacity(params.linears.len()),
        dropout_masks: Vec::with_capacity(params.linears.len()),
        logit: 0.0,
        probability: 0.0,
    };

    let mut x = image.clone();
    for (i, conv) in params.convs.iter().enumerate() {
        let weights = Tensor::from_parts(
            vec![conv.out_ch, conv.in_ch, 3, 3],
            conv.weights.clone(),
        );
        let pre = conv2d(&x, &weights, &conv.bias)?;
        let mut act = pre.clone();
        relu(act.values_mut());
        cache.conv_inputs.push(x);
        cache.conv_pre_relu.push(pre);
        if i + 1 < n_convs {
            let (pooled, argmax) = max_pool2(&act)?;
            cache.pool_argmax.push(argmax);
            x = pooled;
        } else {
            let (features, argmax) = adaptive_max_pool_1(&act)?;
            cache.adaptive_argmax = argmax;
            cache.features = features;
            x = Tensor::zeros(vec![1]); // consumed; head takes over
        }
    }

    let mut rng = derive_rng(dropout_seed, &[TAG_DROPOUT]);
    let mut v = cache.features.clone();
    let n_lin = params.linears.len();
    for (i, lin) in params.linears.iter().enumerate() {
        let mask = match mode {
            RunMode::Train if dropout_rates[i] > 0.0 => {
                Some(dropout_mask(v.len(), dropout_rates[i], &mut rng))
            }
            _ => None,
        };
        if let Some(m) = &mask {
            for (x, s) in v.iter_mut().zip(m) {
                *x *= s;
            }
        }
        cache.dropout_masks.push(mask);
        let mut out = linear(&v, &lin.weights, &lin.bias)?;
        cache.head_pre_act.push(out.clone());
        if i + 1 < n_lin {
            relu(&mut out);
        }
        cache.head_inputs.push(v);
        v = out;
    }

    cache.logit = cache.head_pre_act.last().unwrap()[0];
    cache.probability = sigmoid(cache.logit);
    Ok(cache)
}

/// Binary cross-entropy of one prediction against a label in [0, 1], with
/// the probability clamped away from 0 and 1.
pub fn bce_loss(probability: f64, label: f64) -> f64 {
    let p = probability.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Mean binary cross-entropy over a batch.
pub fn bce_loss_batch(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    if probabilities.len() != labels.len() || probabilities.is_empty() {
        return Err(OdtError::validation(format!(
            "batch loss needs matching non-empty slices, got {} and {}",
            probabilities.len(),
            labels.len()
        )));
    }
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce_loss(p, y))
        .sum();
    Ok(sum / probabilities.len() as f64)
}

/// Exact gradient of the cross-entropy loss for one sample with respect to
/// every parameter, replayed from the sample's forward cache.
pub fn backward(params: &NetParams, cache: &ForwardCache, label: f64) -> Result<Gradients> {
    if !(0.0..=1.0).contains(&label) {
        return Err(OdtError::validation(format!(
            "label must lie in [0, 1], got {label}"
        )));
    }
    let n_convs = params.convs.len();
    let n_lin = params.linears.len();
    let consistent = cache.conv_inputs.len() == n_convs
        && cache.conv_pre_relu.len() == n_convs
        && cache.pool_argmax.len() == n_convs - 1
        && cache.head_inputs.len() == n_lin
        && cache.head_pre_act.len() == n_lin
        && cache.features.len() == params.linears[0].in_dim
        && cache
            .conv_inputs
            .iter()
            .zip(&params.convs)
            .all(|(t, c)| t.shape()[0] == c.in_ch);
    if !consistent {
        return Err(OdtError::validation(
            "forward cache does not match this network's shape".to_string(),
        ));
    }

    let mut grads = params.zero_gradients();

    // Head, walked back from the fused sigmoid/cross-entropy gradient.
    let mut d = vec![cache.probability - label];
    for i in (0..n_lin).rev() {
        let lin = &params.linears[i];
        let (grad_in, grad_w, grad_b) = linear_backward(&cache.head_inputs[i], &lin.weights, &d);
        grads.linears[i].weights = grad_w;
        grads.linears[i].bias = grad_b;
        let mut upstream = grad_in;
        if let Some(mask) = &cache.dropout_masks[i] {
            for (u, m) in upstream.iter_mut().zip(mask) {
                *u *= m;
            }
        }
        if i > 0 {
            // Crossing the ReLU between linear i−1 and this layer.
            for (u, z) in upstream.iter_mut().zip(&cache.head_pre_act[i - 1]) {
                if *z <= 0.0 {
                    *u = 0.0;
                }
            }
        }
        d = upstream;
    }

    // Undo the global pool: each feature's gradient lands on the position
    // that won the channel maximum, gated by that position's ReLU.
    let last_pre = &cache.conv_pre_relu[n_convs - 1];
    let mut d_act = vec![0.0; last_pre.len()];
    for (ch, &idx) in cache.adaptive_argmax.iter().enumerate() {
        if last_pre.values()[idx] > 0.0 {
            d_act[idx] += d[ch];
        }
    }
    let mut d_act = Tensor::from_parts(last_pre.shape().to_vec(), d_act);

    // Conv blocks in reverse: ReLU gate, conv backward, then unpool into the
    // previous block's activation grid.
    for i in (0..n_convs).rev() {
        let pre = &cache.conv_pre_relu[i];
        let dv = d_act.values_mut();
        for (g, z) in dv.iter_mut().zip(pre.values()) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        let conv = &params.convs[i];
        let weights = Tensor::from_parts(
            vec![conv.out_ch, conv.in_ch, 3, 3],
            conv.weights.clone(),
        );
        let (d_input, grad_w, grad_b) = conv2d_backward(&cache.conv_inputs[i], &weights, &d_act);
        grads.convs[i].weights = grad_w;
        grads.convs[i].bias = grad_b;
        if i > 0 {
            d_act = max_pool2_backward(
                cache.conv_pre_relu[i - 1].shape(),
                &cache.pool_argmax[i - 1],
                &d_input,
            );
        }
    }

    Ok(grads)
}

// ==== tests ====

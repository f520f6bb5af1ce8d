//! ADAM parameter updates.
//!
//! Classic bias-corrected ADAM: exponential moving averages of the gradient
//! and its square, corrected for their zero initialization, drive a step
//! whose size self-normalizes per parameter. Moments live in the same
//! layer-by-layer layout as the parameters, and the update walks that layout
//! in declaration order, so a training run is a fixed sequence of floating
//! point operations — rerunning it reproduces every weight bit for bit.

use crate::error::{OdtError, Result};
use crate::net::params::{Gradients, NetParams};

/// First and second gradient moments plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    /// Fresh zeroed moments shaped like the given network.
    pub fn new(params: &NetParams) -> Self {
        Self {
            m: params.zero_gradients(),
            v: params.zero_gradients(),
            t: 0,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One ADAM step over every parameter:
///
/// m ← β₁·m + (1−β₁)·g        v ← β₂·v + (1−β₂)·g²
/// θ ← θ − lr · m̂ / (√v̂ + ε)   with m̂ = m/(1−β₁ᵗ), v̂ = v/(1−β₂ᵗ)
pub fn adam_step(
    params: &mut NetParams,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(OdtError::validation(format!(
            "learning rate must be positive and finite, got {learning_rate}"
        )));
    }
    if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
        return Err(OdtError::validation(format!(
            "betas must lie in [0, 1), got ({beta1}, {beta2})"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OdtError::validation(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !state.m.same_shape(grads) {
        return Err(OdtError::validation(
            "gradient shape does not match the optimizer state".to_string(),
        ));
    }
    let matches_params = params.convs.len() == grads.convs.len()
        && params.linears.len() == grads.linears.len()
        && params
            .convs
            .iter()
            .zip(&grads.convs)
            .all(|(p, g)| p.weights.len() == g.weights.len() && p.bias.len() == g.bias.len())
        && params
            .linears
            .iter()
            .zip(&grads.linears)
            .all(|(p, g)| p.weights.len() == g.weights.len() && p.bias.len() == g.bias.len());
    if !matches_params {
        return Err(OdtError::validation(
            "gradient shape does not match the network".to_string(),
        ));
    }

    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);

    let param_blocks = params
        .convs
        .iter_mut()
        .map(|c| (&mut c.weights, &mut c.bias))
        .chain(params.linears.iter_mut().map(|l| (&mut l.weights, &mut l.bias)));
    let grad_blocks = grads
        .convs
        .iter()
        .map(|g| (&g.weights, &g.bias))
        .chain(grads.linears.iter().map(|g| (&g.weights, &g.bias)));
    let m_blocks = state
        .m
        .convs
        .iter_mut()
        .map(|g| (&mut g.weights, &mut g.bias))
        .chain(state.m.linears.iter_mut().map(|g| (&mut g.weights, &mut g.bias)));
    let v_blocks = state
        .v
        .convs
        .iter_mut()
        .map(|g| (&mut g.weights, &mut g.bias))
        .chain(state.v.linears.iter_mut().map(|g| (&mut g.weights, &mut g.bias)));

    for (((pb, gb), mb), vb) in param_blocks.zip(grad_blocks).zip(m_blocks).zip(v_blocks) {
        for (buf, gbuf, mbuf, vbuf) in [
            (pb.0, gb.0, mb.0, vb.0),
            (pb.1, gb.1, mb.1, vb.1),
        ] {
            for (((p, &g), m), v) in buf
                .iter_mut()
                .zip(gbuf.iter())
                .zip(mbuf.iter_mut())
                .zip(vbuf.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
    Ok(())
}

// ==== tests ====

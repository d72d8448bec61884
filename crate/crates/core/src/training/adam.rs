//! Adam with decoupled weight decay.
//!
//! ```text
//! θ ← θ - lr · wd · θ
//! m ← β1 m + (1 - β1) g,   v ← β2 v + (1 - β2) g²
//! θ ← θ - lr · m̂ / (sqrt(v̂) + ε),   m̂ = m / (1 - β1^t),  v̂ = v / (1 - β2^t)
//! ```

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One optimizer step. Gradients are checked for finiteness before anything
/// is modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if let Some(bad) = grads
        .tensors()
        .into_iter()
        .find(|t| t.values.iter().any(|g| !g.is_finite()))
    {
        return Err(Error::NonFiniteGradient { param: bad.name });
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);
    let decay = 1.0 - lr * weight_decay;

    state.m.zip_mut(grads, |_, m, g| {
        for (m, &g) in m.iter_mut().zip(g) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
        }
    });
    state.v.zip_mut(grads, |_, v, g| {
        for (v, &g) in v.iter_mut().zip(g) {
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        }
    });
    let m_all = state.m.tensors();
    let v_all = state.v.tensors();
    let mut i = 0;
    params.for_each_mut(|_, p| {
        let (m, v) = (m_all[i].values, v_all[i].values);
        for ((p, &m), &v) in p.iter_mut().zip(m).zip(v) {
            *p *= decay;
            *p -= lr * (m / bias1) / ((v / bias2).sqrt() + EPSILON);
        }
        i += 1;
    });
    Ok(())
}

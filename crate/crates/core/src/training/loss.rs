use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    /// `-Σ [y log p + (1 - y) log(1 - p)]` over the node set.
    pub sum: f64,
    pub mean: f64,
}

/// Binary cross-entropy summed over `nodes`; `targets[i]` labels `nodes[i]`.
pub fn bce_loss(probs: &[f64], nodes: &[usize], targets: &[u8]) -> Result<LossValue> {
    bce_loss_weighted(probs, nodes, targets, None)
}

/// As [`bce_loss`], with optional per-class weights `[benign, fraud]`.
pub fn bce_loss_weighted(
    probs: &[f64],
    nodes: &[usize],
    targets: &[u8],
    class_weights: Option<[f64; 2]>,
) -> Result<LossValue> {
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if nodes.len() != targets.len() {
        return Err(Error::dims("bce_loss", nodes.len(), targets.len()));
    }
    let mut sum = 0.0;
    for (&v, &y) in nodes.iter().zip(targets) {
        let p = probs[v].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let w = class_weights.map_or(1.0, |cw| cw[y as usize]);
        sum -= w * if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(LossValue {
        sum,
        mean: sum / nodes.len() as f64,
    })
}

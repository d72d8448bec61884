//! Loss, gradients, optimizer, data split and the training loop.

mod adam;
mod backward;
mod config;
pub mod gradcheck;
mod loss;
mod split;

use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use backward::backward;
pub use config::{BatchSize, TrainConfig};
pub use loss::{bce_loss, bce_loss_weighted, LossValue, PROB_CLAMP};
pub use split::{stratified_split, DEFAULT_FRACTIONS};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, MultiRelationGraph, SplitMasks, BENIGN, FRAUD};
use crate::metrics::{evaluate, EvalResult};
use crate::model::{forward_full, predict_proba, ForwardMode, ModelConfig, ModelInputs, ModelParams};

/// One validation evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Summed cross-entropy of this epoch's minibatch.
    pub train_loss: f64,
    pub train_loss_mean: f64,
    pub val: EvalResult,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub epoch: usize,
    pub val: EvalResult,
}

/// Trained parameters with everything needed to rebuild the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: ModelConfig,
    pub params: ModelParams,
    /// `None` when no evaluation took place.
    pub best: Option<BestRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub reports: Vec<EpochReport>,
    /// Summed minibatch loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Propagates features once for all relations under `cfg`.
pub fn prepare_inputs(graphs: &MultiRelationGraph, x: &FeatureMatrix, cfg: &TrainConfig) -> Result<ModelInputs> {
    ModelInputs::prepare(graphs, x, &cfg.high_order())
}

fn step_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn class_weights(targets: &[u8]) -> Result<[f64; 2]> {
    let fraud = targets.iter().filter(|&&y| y == FRAUD).count();
    let benign = targets.len() - fraud;
    if fraud == 0 || benign == 0 {
        return Err(Error::SingleClass);
    }
    let half = targets.len() as f64 / 2.0;
    let mut w = [0.0; 2];
    w[BENIGN as usize] = half / benign as f64;
    w[FRAUD as usize] = half / fraud as f64;
    Ok(w)
}

/// Evaluates `params` on `nodes` in inference mode.
pub fn evaluate_nodes(
    inputs: &ModelInputs,
    params: &ModelParams,
    model: &ModelConfig,
    labels: &LabelVector,
    nodes: &[usize],
    threshold: f64,
) -> Result<EvalResult> {
    let probs = predict_proba(inputs, params, model)?;
    let targets = labels.targets(nodes)?;
    let scores: Vec<f64> = nodes.iter().map(|&v| probs[v]).collect();
    evaluate(&scores, &targets, threshold)
}

/// Runs the optimization loop and returns the parameters with the best
/// validation AUC (earlier epoch on ties).
///
/// Every epoch is one full-graph forward pass whose loss covers a random
/// subset of `batch_size` train nodes. Validation happens every
/// `eval_every` epochs and after the last one.
pub fn train(
    inputs: &ModelInputs,
    labels: &LabelVector,
    masks: &SplitMasks,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if inputs.orders() != cfg.layers {
        return Err(Error::dims("train", format!("{} propagated orders", cfg.layers), inputs.orders()));
    }
    if labels.len() != inputs.n() {
        return Err(Error::dims("train labels", inputs.n(), labels.len()));
    }
    if masks.train.is_empty() || masks.val.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    let model = cfg.model_config(inputs.features().ncols(), inputs.relations().len());
    let mut params = ModelParams::init(&model, cfg.seed)?;
    let train_targets = labels.targets(&masks.train)?;
    labels.targets(&masks.val)?;
    let weights = if cfg.class_weighting {
        Some(class_weights(&train_targets)?)
    } else {
        None
    };

    let mut state = AdamState::new(&params);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(1);
    let start = Instant::now();
    let mut reports: Vec<EpochReport> = Vec::new();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(BestRecord, ModelParams)> = None;

    for epoch in 0..cfg.epochs {
        let (nodes, targets) = match cfg.batch_size {
            BatchSize::Nodes(b) if b < masks.train.len() => {
                let mut picked = index::sample(&mut batch_rng, masks.train.len(), b).into_vec();
                picked.sort_unstable();
                let nodes: Vec<usize> = picked.iter().map(|&i| masks.train[i]).collect();
                let targets = picked.iter().map(|&i| train_targets[i]).collect();
                (nodes, targets)
            }
            _ => (masks.train.clone(), train_targets.clone()),
        };

        let mode = ForwardMode::Train {
            seed: step_seed(cfg.seed, epoch),
        };
        let trace = forward_full(inputs, &params, &model, mode)?;
        let probs = trace.probs.as_slice().expect("contiguous probabilities");
        let loss = bce_loss_weighted(probs, &nodes, &targets, weights)?;
        if !loss.sum.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                last_report: reports.pop().map(Box::new),
            });
        }
        loss_history.push(loss.sum);
        let grads = backward(&trace, inputs, &params, &nodes, &targets, weights)?;
        adam_step(&mut params, &grads, &mut state, cfg.lr, cfg.weight_decay)?;

        if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
            let val = evaluate_nodes(inputs, &params, &model, labels, &masks.val, cfg.threshold)?;
            log::debug!("epoch {epoch}: loss {:.6} val auc {:.4}", loss.mean, val.auc);
            if best.as_ref().is_none_or(|(b, _)| val.auc > b.val.auc) {
                best = Some((BestRecord { epoch, val }, params.clone()));
            }
            reports.push(EpochReport {
                epoch,
                train_loss: loss.sum,
                train_loss_mean: loss.mean,
                val,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
    }

    let (best, params) = match best {
        Some((record, p)) => (Some(record), p),
        None => (None, params),
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            model,
            params,
            best,
        },
        reports,
        loss_history,
    })
}

/// Splits `labels` with the configured fractions and seed.
pub fn split_for(labels: &LabelVector, cfg: &TrainConfig) -> Result<SplitMasks> {
    stratified_split(labels, cfg.fractions(), cfg.seed)
}

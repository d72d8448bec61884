//! The HOGRL network.
//!
//! Per relation `r`:
//!
//! ```text
//! h'_l  = ReLU((S^l X) W'_l)                      one expert per order l
//! f_l   = <w_l, h'_l> + b_l,  α = softmax_l(f)    gating
//! h'    = Σ_l α_l h'_l                            expert mixture
//! h^k   = ReLU([h^{k-1} ⊕ mean_N(h^{k-1})] W_k)   mean aggregator, h^0 = X
//! z^(r) = h^K + γ h'
//! ```
//!
//! The relation embeddings are concatenated into `Z` and a ReLU MLP with one
//! output logit gives `p = sigmoid(MLP(Z))`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, MultiRelationGraph, RelationGraph};
use crate::propagation::{propagate_features, HighOrderConfig, PropagatedFeatures};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_dim: usize,
    /// Embedding width `d_h`, shared by experts and the aggregator output.
    pub hidden_dim: usize,
    /// Number of high-order experts `L`.
    pub orders: usize,
    /// Aggregator depth `K`.
    pub sage_depth: usize,
    /// Hidden widths of the detection MLP.
    pub head_hidden: Vec<usize>,
    pub relations: usize,
    /// Weight of the high-order branch; 0 gives the aggregator-only model.
    pub gamma: f64,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.in_dim == 0 || self.hidden_dim == 0 {
            return bad("input and hidden dimensions must be positive");
        }
        if self.orders == 0 {
            return bad("the number of orders must be at least 1");
        }
        if self.sage_depth == 0 {
            return bad("the aggregator depth must be at least 1");
        }
        if self.relations == 0 {
            return bad("at least one relation is required");
        }
        if self.head_hidden.contains(&0) {
            return bad("head hidden widths must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        self.relations * self.hidden_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationParams {
    /// `W'_l`, each `in_dim × hidden_dim`.
    pub experts: Vec<Array2<f64>>,
    /// Row `l` holds the gating vector `w_l`.
    pub gate_weights: Array2<f64>,
    pub gate_biases: Array1<f64>,
    /// `W_k`, each `2·d_{k-1} × hidden_dim` acting on `[self ⊕ neighbor mean]`.
    pub sage: Vec<Array2<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All learnable tensors. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub relations: Vec<RelationParams>,
    pub head: Vec<DenseLayer>,
}

/// A named, shaped, read-only view of one parameter tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dh = cfg.hidden_dim;
        let relations = (0..cfg.relations)
            .map(|_| {
                let experts = (0..cfg.orders).map(|_| glorot(&mut rng, cfg.in_dim, dh)).collect();
                let gate_bound = (6.0 / (dh + 1) as f64).sqrt();
                let gate_weights = Array2::from_shape_simple_fn((cfg.orders, dh), || {
                    rng.random_range(-gate_bound..=gate_bound)
                });
                let sage = (0..cfg.sage_depth)
                    .map(|k| {
                        let d_prev = if k == 0 { cfg.in_dim } else { dh };
                        glorot(&mut rng, 2 * d_prev, dh)
                    })
                    .collect();
                RelationParams {
                    experts,
                    gate_weights,
                    gate_biases: Array1::zeros(cfg.orders),
                    sage,
                }
            })
            .collect();
        let mut head = Vec::new();
        let mut width = cfg.embedding_dim();
        for &out in cfg.head_hidden.iter().chain(std::iter::once(&1)) {
            head.push(DenseLayer {
                weight: glorot(&mut rng, width, out),
                bias: Array1::zeros(out),
            });
            width = out;
        }
        Ok(Self { relations, head })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, v| v.fill(0.0));
        z
    }

    /// Every tensor in a fixed manifest order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (r, rel) in self.relations.iter().enumerate() {
            for (l, w) in rel.experts.iter().enumerate() {
                out.push(view(format!("rel{r}.expert{}", l + 1), w.shape(), w.as_slice()));
            }
            out.push(view(format!("rel{r}.gate_weight"), rel.gate_weights.shape(), rel.gate_weights.as_slice()));
            out.push(view(format!("rel{r}.gate_bias"), rel.gate_biases.shape(), rel.gate_biases.as_slice()));
            for (k, w) in rel.sage.iter().enumerate() {
                out.push(view(format!("rel{r}.sage{}", k + 1), w.shape(), w.as_slice()));
            }
        }
        for (i, layer) in self.head.iter().enumerate() {
            out.push(view(format!("head{i}.weight"), layer.weight.shape(), layer.weight.as_slice()));
            out.push(view(format!("head{i}.bias"), layer.bias.shape(), layer.bias.as_slice()));
        }
        out
    }

    /// Visits every tensor mutably, in the same order as [`ModelParams::tensors`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (r, rel) in self.relations.iter_mut().enumerate() {
            for (l, w) in rel.experts.iter_mut().enumerate() {
                f(&format!("rel{r}.expert{}", l + 1), slice_mut(w.as_slice_mut()));
            }
            f(&format!("rel{r}.gate_weight"), slice_mut(rel.gate_weights.as_slice_mut()));
            f(&format!("rel{r}.gate_bias"), slice_mut(rel.gate_biases.as_slice_mut()));
            for (k, w) in rel.sage.iter_mut().enumerate() {
                f(&format!("rel{r}.sage{}", k + 1), slice_mut(w.as_slice_mut()));
            }
        }
        for (i, layer) in self.head.iter_mut().enumerate() {
            f(&format!("head{i}.weight"), slice_mut(layer.weight.as_slice_mut()));
            f(&format!("head{i}.bias"), slice_mut(layer.bias.as_slice_mut()));
        }
    }

    /// Visits matching tensors of `self` and `other` pairwise.
    pub fn zip_mut(&mut self, other: &ModelParams, mut f: impl FnMut(&str, &mut [f64], &[f64])) {
        let others = other.tensors();
        let mut i = 0;
        self.for_each_mut(|name, values| {
            let o = &others[i];
            assert_eq!(o.values.len(), values.len(), "tensor `{name}` differs in size");
            f(name, values, o.values);
            i += 1;
        });
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    /// Hash of every parameter bit pattern; identifies stale traces.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for t in self.tensors() {
            for v in t.values {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.values.iter().all(|v| v.is_finite()))
    }
}

fn view<'a>(name: String, shape: &[usize], values: Option<&'a [f64]>) -> TensorRef<'a> {
    TensorRef {
        name,
        shape: shape.to_vec(),
        values: values.expect("parameters are kept in standard layout"),
    }
}

fn slice_mut(values: Option<&mut [f64]>) -> &mut [f64] {
    values.expect("parameters are kept in standard layout")
}

/// Per-relation graph data consumed by the forward pass. Built once; training
/// only reads it.
#[derive(Clone, Debug)]
pub struct PreparedRelation {
    mean_adj: RelationGraph,
    mean_adj_t: RelationGraph,
    propagated: PropagatedFeatures,
}

impl PreparedRelation {
    pub fn mean_adjacency(&self) -> &RelationGraph {
        &self.mean_adj
    }

    pub fn propagated(&self) -> &PropagatedFeatures {
        &self.propagated
    }

    pub(crate) fn mean_adjacency_t(&self) -> &RelationGraph {
        &self.mean_adj_t
    }
}

#[derive(Clone, Debug)]
pub struct ModelInputs {
    features: Array2<f64>,
    relations: Vec<PreparedRelation>,
}

impl ModelInputs {
    /// Row-normalizes every relation and caches its propagated features.
    pub fn prepare(
        graphs: &MultiRelationGraph,
        x: &FeatureMatrix,
        cfg: &HighOrderConfig,
    ) -> Result<Self> {
        let propagated = graphs
            .relations()
            .iter()
            .map(|g| propagate_features(g, x.data(), cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(graphs, x, propagated)
    }

    pub fn from_parts(
        graphs: &MultiRelationGraph,
        x: &FeatureMatrix,
        propagated: Vec<PropagatedFeatures>,
    ) -> Result<Self> {
        if graphs.n() != x.n() {
            return Err(Error::dims("model inputs", format!("{} feature rows", graphs.n()), x.n()));
        }
        if propagated.len() != graphs.len() {
            return Err(Error::dims("model inputs", format!("{} propagated caches", graphs.len()), propagated.len()));
        }
        let relations = graphs
            .relations()
            .iter()
            .zip(propagated)
            .map(|(g, propagated)| {
                let mean_adj = g.row_normalize();
                let mean_adj_t = mean_adj.transpose();
                PreparedRelation {
                    mean_adj,
                    mean_adj_t,
                    propagated,
                }
            })
            .collect();
        Ok(Self {
            features: x.data().clone(),
            relations,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn relations(&self) -> &[PreparedRelation] {
        &self.relations
    }

    pub fn orders(&self) -> usize {
        self.relations[0].propagated.len()
    }
}

/// Whether dropout is active, and the seed of its masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    Train { seed: u64 },
}

impl ForwardMode {
    fn mask(&self, rate: f64, shape: (usize, usize), stream: u64) -> Option<Array2<f64>> {
        match *self {
            ForwardMode::Train { seed } if rate > 0.0 => Some(dropout_mask(rate, shape, seed, stream)),
            _ => None,
        }
    }
}

/// Inverted-dropout mask: entries are 0 or `1 / (1 - rate)`.
fn dropout_mask(rate: f64, shape: (usize, usize), seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

fn sage_stream(r: usize, k: usize) -> u64 {
    ((r as u64) << 16) | k as u64
}

fn head_stream(i: usize) -> u64 {
    (1 << 40) | i as u64
}

pub(crate) fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| if x > 0.0 { x } else { 0.0 })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intermediate values of one relation's branches.
#[derive(Clone, Debug)]
pub struct RelationTrace {
    pub expert_pre: Vec<Array2<f64>>,
    pub expert_out: Vec<Array2<f64>>,
    pub gate_scores: Array2<f64>,
    /// `n × L`; each row lies on the probability simplex.
    pub alpha: Array2<f64>,
    /// The expert mixture `h'`.
    pub mixed: Array2<f64>,
    /// Layer inputs `[h^{k-1} ⊕ mean_N(h^{k-1})]`.
    pub sage_inputs: Vec<Array2<f64>>,
    pub sage_pre: Vec<Array2<f64>>,
    pub sage_masks: Vec<Option<Array2<f64>>>,
    /// `h^k` after activation and dropout.
    pub sage_out: Vec<Array2<f64>>,
    pub fused: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub relations: Vec<RelationTrace>,
    /// `Z`, the concatenated relation embeddings.
    pub embedding: Array2<f64>,
    pub head_inputs: Vec<Array2<f64>>,
    pub head_pre: Vec<Array2<f64>>,
    pub head_masks: Vec<Option<Array2<f64>>>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
    pub gamma: f64,
    pub(crate) fingerprint: u64,
}

impl ForwardTrace {
    pub fn is_current(&self, params: &ModelParams) -> bool {
        self.fingerprint == params.fingerprint()
    }
}

/// `h'_l = ReLU((S^l X) W'_l)` for every order, reading the cached products.
pub fn expert_forward(
    propagated: &PropagatedFeatures,
    params: &RelationParams,
) -> Result<Vec<Array2<f64>>> {
    Ok(experts_traced(propagated, params)?.1)
}

/// Pre-activations and outputs of every expert.
type ExpertTrace = (Vec<Array2<f64>>, Vec<Array2<f64>>);

fn experts_traced(propagated: &PropagatedFeatures, params: &RelationParams) -> Result<ExpertTrace> {
    if propagated.len() != params.experts.len() {
        return Err(Error::dims("expert_forward", format!("{} orders", params.experts.len()), propagated.len()));
    }
    let mut pre = Vec::with_capacity(propagated.len());
    let mut out = Vec::with_capacity(propagated.len());
    for (sx, w) in propagated.orders().iter().zip(&params.experts) {
        if sx.ncols() != w.nrows() {
            return Err(Error::dims("expert_forward", format!("{} feature columns", w.nrows()), sx.ncols()));
        }
        let p = sx.dot(w);
        out.push(relu(&p));
        pre.push(p);
    }
    Ok((pre, out))
}

/// Gating scores, softmax weights and the mixed representation.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOutput {
    pub scores: Array2<f64>,
    pub alpha: Array2<f64>,
    pub mixed: Array2<f64>,
}

pub fn gate_and_mix(
    experts: &[Array2<f64>],
    gate_weights: &Array2<f64>,
    gate_biases: &Array1<f64>,
) -> Result<GateOutput> {
    let orders = experts.len();
    if orders == 0 {
        return Err(Error::InvalidConfig("gating needs at least one expert".into()));
    }
    if gate_weights.nrows() != orders || gate_biases.len() != orders {
        return Err(Error::dims("gate_and_mix", format!("{orders} gates"), gate_weights.nrows()));
    }
    let (n, dh) = experts[0].dim();
    let mut scores = Array2::<f64>::zeros((n, orders));
    for (l, h) in experts.iter().enumerate() {
        let f = h.dot(&gate_weights.row(l)) + gate_biases[l];
        scores.column_mut(l).assign(&f);
    }
    let mut alpha = scores.clone();
    for mut row in alpha.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    let mut mixed = Array2::<f64>::zeros((n, dh));
    for (l, h) in experts.iter().enumerate() {
        mixed += &(h * &alpha.column(l).insert_axis(Axis(1)));
    }
    Ok(GateOutput {
        scores,
        alpha,
        mixed,
    })
}

struct SageTrace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    out: Vec<Array2<f64>>,
}

fn sage_traced(
    mean_adj: &RelationGraph,
    x: &Array2<f64>,
    weights: &[Array2<f64>],
    dropout: f64,
    mode: ForwardMode,
    relation: usize,
) -> Result<SageTrace> {
    let mut t = SageTrace {
        inputs: Vec::with_capacity(weights.len()),
        pre: Vec::with_capacity(weights.len()),
        masks: Vec::with_capacity(weights.len()),
        out: Vec::with_capacity(weights.len()),
    };
    let mut h = x.to_owned();
    for (k, w) in weights.iter().enumerate() {
        if w.nrows() != 2 * h.ncols() {
            return Err(Error::dims("sage_forward", format!("{} weight rows", 2 * h.ncols()), w.nrows()));
        }
        let neighbors = mean_adj.spmm(&h)?;
        let input = concatenate![Axis(1), h, neighbors];
        let pre = input.dot(w);
        let mut out = relu(&pre);
        let mask = mode.mask(dropout, out.dim(), sage_stream(relation, k));
        if let Some(m) = &mask {
            out *= m;
        }
        h = out.clone();
        t.inputs.push(input);
        t.pre.push(pre);
        t.masks.push(mask);
        t.out.push(out);
    }
    Ok(t)
}

/// Mean-aggregator branch on the original graph, inference mode.
///
/// `mean_adj` must be row-normalized; isolated nodes aggregate a zero vector.
pub fn sage_forward(
    mean_adj: &RelationGraph,
    x: &Array2<f64>,
    weights: &[Array2<f64>],
) -> Result<Array2<f64>> {
    if weights.is_empty() {
        return Err(Error::InvalidConfig("the aggregator needs at least one layer".into()));
    }
    let mut t = sage_traced(mean_adj, x, weights, 0.0, ForwardMode::Eval, 0)?;
    Ok(t.out.pop().expect("at least one layer"))
}

/// `z^(r) = h^(r) + γ h'^(r)`, concatenated across relations in order.
pub fn fuse_and_concat(
    aggregated: &[Array2<f64>],
    mixed: &[Array2<f64>],
    gamma: f64,
) -> Result<Array2<f64>> {
    if aggregated.is_empty() || aggregated.len() != mixed.len() {
        return Err(Error::dims("fuse_and_concat", aggregated.len(), mixed.len()));
    }
    let dim = aggregated[0].dim();
    if aggregated.iter().chain(mixed).any(|m| m.dim() != dim) {
        return Err(Error::dims("fuse_and_concat", format!("{dim:?} blocks"), "mixed shapes"));
    }
    let fused: Vec<Array2<f64>> = aggregated
        .iter()
        .zip(mixed)
        .map(|(h, hp)| h + &(hp * gamma))
        .collect();
    Ok(concat_columns(&fused))
}

fn concat_columns(blocks: &[Array2<f64>]) -> Array2<f64> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(1), &views).expect("blocks share the row count")
}

struct HeadTrace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    logits: Array1<f64>,
}

fn head_traced(z: &Array2<f64>, head: &[DenseLayer], dropout: f64, mode: ForwardMode) -> Result<HeadTrace> {
    let mut t = HeadTrace {
        inputs: Vec::new(),
        pre: Vec::new(),
        masks: Vec::new(),
        logits: Array1::zeros(0),
    };
    let mut a = z.to_owned();
    let last = head.len() - 1;
    for (i, layer) in head.iter().enumerate() {
        if layer.weight.nrows() != a.ncols() {
            return Err(Error::dims("predict", format!("{} input columns", layer.weight.nrows()), a.ncols()));
        }
        let pre = a.dot(&layer.weight) + &layer.bias;
        t.inputs.push(a);
        if i == last {
            t.logits = pre.column(0).to_owned();
            t.pre.push(pre);
            break;
        }
        let mut out = relu(&pre);
        let mask = mode.mask(dropout, out.dim(), head_stream(i));
        if let Some(m) = &mask {
            out *= m;
        }
        t.pre.push(pre);
        t.masks.push(mask);
        a = out;
    }
    Ok(t)
}

/// Fraud probabilities from the embedding, inference mode.
pub fn predict(z: &Array2<f64>, head: &[DenseLayer]) -> Result<Array1<f64>> {
    if head.is_empty() {
        return Err(Error::InvalidConfig("the detection head needs an output layer".into()));
    }
    Ok(head_traced(z, head, 0.0, ForwardMode::Eval)?.logits.mapv(sigmoid))
}

fn check_shapes(inputs: &ModelInputs, params: &ModelParams) -> Result<()> {
    if inputs.relations.len() != params.relations.len() {
        return Err(Error::dims("forward", format!("{} relations", params.relations.len()), inputs.relations.len()));
    }
    if params.head.is_empty() {
        return Err(Error::InvalidConfig("the detection head needs an output layer".into()));
    }
    Ok(())
}

/// Full forward pass recording everything reverse-mode differentiation needs.
pub fn forward_full(
    inputs: &ModelInputs,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: ForwardMode,
) -> Result<ForwardTrace> {
    check_shapes(inputs, params)?;
    let x = &inputs.features;
    let mut relations = Vec::with_capacity(params.relations.len());
    for (r, (prep, rp)) in inputs.relations.iter().zip(&params.relations).enumerate() {
        let (expert_pre, expert_out) = experts_traced(&prep.propagated, rp)?;
        let gate = gate_and_mix(&expert_out, &rp.gate_weights, &rp.gate_biases)?;
        let sage = sage_traced(&prep.mean_adj, x, &rp.sage, cfg.dropout, mode, r)?;
        let h = sage.out.last().expect("at least one aggregator layer");
        if h.dim() != gate.mixed.dim() {
            return Err(Error::dims("fuse", format!("{:?}", gate.mixed.dim()), format!("{:?}", h.dim())));
        }
        let fused = h + &(&gate.mixed * cfg.gamma);
        relations.push(RelationTrace {
            expert_pre,
            expert_out,
            gate_scores: gate.scores,
            alpha: gate.alpha,
            mixed: gate.mixed,
            sage_inputs: sage.inputs,
            sage_pre: sage.pre,
            sage_masks: sage.masks,
            sage_out: sage.out,
            fused,
        });
    }
    let blocks: Vec<Array2<f64>> = relations.iter().map(|t| t.fused.clone()).collect();
    let embedding = concat_columns(&blocks);
    let head = head_traced(&embedding, &params.head, cfg.dropout, mode)?;
    let probs = head.logits.mapv(sigmoid);
    Ok(ForwardTrace {
        relations,
        embedding,
        head_inputs: head.inputs,
        head_pre: head.pre,
        head_masks: head.masks,
        logits: head.logits,
        probs,
        gamma: cfg.gamma,
        fingerprint: params.fingerprint(),
    })
}

/// Probabilities of the aggregator-only model: no expert computation at all.
pub fn forward_aggregator_only(
    inputs: &ModelInputs,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: ForwardMode,
) -> Result<Array1<f64>> {
    check_shapes(inputs, params)?;
    let blocks = inputs
        .relations
        .iter()
        .zip(&params.relations)
        .enumerate()
        .map(|(r, (prep, rp))| {
            let mut t = sage_traced(&prep.mean_adj, &inputs.features, &rp.sage, cfg.dropout, mode, r)?;
            Ok(t.out.pop().expect("at least one aggregator layer"))
        })
        .collect::<Result<Vec<_>>>()?;
    let z = concat_columns(&blocks);
    Ok(head_traced(&z, &params.head, cfg.dropout, mode)?.logits.mapv(sigmoid))
}

/// Inference-mode probabilities.
pub fn predict_proba(inputs: &ModelInputs, params: &ModelParams, cfg: &ModelConfig) -> Result<Array1<f64>> {
    Ok(forward_full(inputs, params, cfg, ForwardMode::Eval)?.probs)
}

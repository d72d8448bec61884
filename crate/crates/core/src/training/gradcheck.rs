//! Central finite-difference verification of [`backward`].
//!
//! The numerical side only ever calls the forward pass, so it shares no code
//! with the analytic gradients it checks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::graph::{FeatureMatrix, MultiRelationGraph, RelationGraph};
use crate::model::{forward_full, ForwardMode, ModelConfig, ModelInputs, ModelParams};
use crate::propagation::{HighOrderConfig, PropagationMode};
use crate::training::backward::backward;
use crate::training::loss::bce_loss;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Denominator floor of the relative error. Gradients smaller than this are
/// compared absolutely; a central difference cannot resolve them more
/// finely than its own rounding noise.
pub const RELATIVE_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    /// `name[index]` of the worst scalar.
    pub worst: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

impl GradcheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

/// A self-contained problem for [`gradcheck`].
pub struct GradcheckProblem {
    pub inputs: ModelInputs,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub nodes: Vec<usize>,
    pub targets: Vec<u8>,
    pub mode: ForwardMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradcheckSize {
    /// n = 8, L = 3, K = 1, d_h = 4.
    Small,
    /// n = 20, L = 4, K = 2, d_h = 6.
    Medium,
}

impl GradcheckProblem {
    pub fn generate(size: GradcheckSize, seed: u64) -> Result<Self> {
        let (n, orders, depth, hidden, relations) = match size {
            GradcheckSize::Small => (8, 3, 1, 4, 2),
            GradcheckSize::Medium => (20, 4, 2, 6, 2),
        };
        let in_dim = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut graphs = Vec::new();
        for _ in 0..relations {
            let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|u| (u, u + 1)).collect();
            for _ in 0..n {
                edges.push((rng.random_range(0..n), rng.random_range(0..n)));
            }
            graphs.push(RelationGraph::from_edges(&edges, n, true)?);
        }
        let names = (0..relations).map(|r| format!("rel{r}")).collect();
        let graphs = MultiRelationGraph::new(graphs, names)?;
        let x = Array2::from_shape_simple_fn((n, in_dim), || rng.sample::<f64, _>(StandardNormal));
        let x = FeatureMatrix::new(x)?;
        let inputs = ModelInputs::prepare(&graphs, &x, &HighOrderConfig::new(orders, PropagationMode::WalkCount, true))?;
        let config = ModelConfig {
            in_dim,
            hidden_dim: hidden,
            orders,
            sage_depth: depth,
            head_hidden: vec![hidden],
            relations,
            gamma: 0.8,
            dropout: 0.3,
        };
        let params = ModelParams::init(&config, seed ^ 0x5eed)?;
        Ok(Self {
            inputs,
            config,
            params,
            nodes: (0..n).collect(),
            targets: (0..n).map(|v| (v % 2) as u8).collect(),
            mode: ForwardMode::Train { seed },
        })
    }

    fn loss(&self, params: &ModelParams) -> Result<f64> {
        let trace = forward_full(&self.inputs, params, &self.config, self.mode)?;
        let probs = trace.probs.to_vec();
        Ok(bce_loss(&probs, &self.nodes, &self.targets)?.sum)
    }
}

/// Compares every analytic partial derivative with
/// `(L(θ + h) - L(θ - h)) / 2h`.
pub fn gradcheck(problem: &GradcheckProblem, step: f64) -> Result<GradcheckReport> {
    let trace = forward_full(&problem.inputs, &problem.params, &problem.config, problem.mode)?;
    let analytic = backward(&trace, &problem.inputs, &problem.params, &problem.nodes, &problem.targets, None)?;
    let analytic_tensors: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.values.to_vec()))
        .collect();

    let mut report = GradcheckReport {
        max_relative_error: 0.0,
        worst: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
    };
    for (ti, (name, values)) in analytic_tensors.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let plus = perturbed(&problem.params, ti, i, step);
            let minus = perturbed(&problem.params, ti, i, -step);
            let numeric = (problem.loss(&plus)? - problem.loss(&minus)?) / (2.0 * step);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_empty() {
                report.max_relative_error = err;
                report.worst = format!("{name}[{i}]");
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

fn perturbed(params: &ModelParams, tensor: usize, index: usize, delta: f64) -> ModelParams {
    let mut p = params.clone();
    let mut t = 0;
    p.for_each_mut(|_, values| {
        if t == tensor {
            values[index] += delta;
        }
        t += 1;
    });
    p
}

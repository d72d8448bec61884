//! Fraud detection on multi-relation graphs with decoupled high-order
//! propagation.
//!
//! Each relation contributes two branches: experts over the pure order-`l`
//! features `S^l X` mixed by a per-node softmax gate, and a mean-aggregator
//! over the original graph. Their weighted sum per relation is concatenated
//! and fed to an MLP detection head.
//!
//! Modules:
//! - [`graph`]: CSR adjacency, labels, node homophily.
//! - [`propagation`]: the `S^l X` caches and layerwise homophily.
//! - [`model`]: parameters and the forward pass.
//! - [`training`]: loss, gradients, Adam, split, training loop, gradient check.
//! - [`metrics`]: AUC, F1-macro, GMean.
//! - [`synth`]: camouflage graph generator.
//! - [`io`]: text file formats.

pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod propagation;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use graph::{FeatureMatrix, LabelVector, MultiRelationGraph, RelationGraph, SplitMasks};
pub use metrics::EvalResult;
pub use model::{ModelConfig, ModelInputs, ModelParams};
pub use propagation::{propagate_features, HighOrderConfig, PropagationMode};
pub use training::{train, Checkpoint, TrainConfig};

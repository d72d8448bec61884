use thiserror::Error;

use crate::training::EpochReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) is out of range for a graph with {n} nodes")]
    NodeOutOfRange { u: usize, v: usize, n: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("node {0} is unlabeled")]
    UnlabeledNode(usize),

    #[error("invalid label {label} for node {node}; expected 0 or 1")]
    InvalidLabel { node: usize, label: i64 },

    #[error("no labeled nodes")]
    NoLabeledNodes,

    #[error("both classes must be present")]
    SingleClass,

    #[error("class {class} has {count} labeled nodes; at least 3 are required")]
    TooFewInClass { class: u8, count: usize },

    #[error("node set is empty")]
    EmptyNodeSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("forward trace is stale: parameters changed since the forward pass")]
    StaleTrace,

    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss {
        epoch: usize,
        last_report: Option<Box<EpochReport>>,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. }
        )
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::propagation::{HighOrderConfig, PropagationMode};

/// Number of labeled train nodes whose loss enters one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchSize {
    Full,
    Nodes(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Nodes(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("batch size must be `full` or a positive integer, got `{s}`")),
            Ok(n) => Ok(BatchSize::Nodes(n)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub eval_every: usize,
    pub batch_size: BatchSize,
    pub dropout: f64,
    /// High-order depth `L`.
    pub layers: usize,
    /// Aggregator depth `K`.
    pub sage_depth: usize,
    pub hidden_dim: usize,
    pub head_hidden: Vec<usize>,
    pub gamma: f64,
    pub seed: u64,
    pub mode: PropagationMode,
    /// Row-normalize adjacency before high-order propagation.
    pub normalize: bool,
    pub threshold: f64,
    /// Weight the loss by inverse class frequency of the train set.
    pub class_weighting: bool,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            weight_decay: 5e-5,
            epochs: 1000,
            eval_every: 10,
            batch_size: BatchSize::Nodes(2048),
            dropout: 0.3,
            layers: 7,
            sage_depth: 2,
            hidden_dim: 64,
            head_hidden: vec![64],
            gamma: 1.0,
            seed: 0,
            mode: PropagationMode::WalkCount,
            normalize: true,
            threshold: 0.5,
            class_weighting: false,
            train_fraction: 0.4,
            val_fraction: 0.4,
            test_fraction: 0.2,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn list(values: &[usize]) -> String {
    values
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl TrainConfig {
    pub const KEYS: [&'static str; 19] = [
        "lr",
        "weight_decay",
        "epochs",
        "eval_every",
        "batch_size",
        "dropout",
        "layers",
        "sage_depth",
        "hidden_dim",
        "head_hidden",
        "gamma",
        "seed",
        "mode",
        "normalize",
        "threshold",
        "class_weighting",
        "train_fraction",
        "val_fraction",
        "test_fraction",
    ];

    /// Every field as `(key, value)` in [`Self::KEYS`] order. Reals use the
    /// shortest representation that parses back to the same bits.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let values = [
            format!("{:?}", self.lr),
            format!("{:?}", self.weight_decay),
            self.epochs.to_string(),
            self.eval_every.to_string(),
            self.batch_size.to_string(),
            format!("{:?}", self.dropout),
            self.layers.to_string(),
            self.sage_depth.to_string(),
            self.hidden_dim.to_string(),
            list(&self.head_hidden),
            format!("{:?}", self.gamma),
            self.seed.to_string(),
            self.mode.to_string(),
            self.normalize.to_string(),
            format!("{:?}", self.threshold),
            self.class_weighting.to_string(),
            format!("{:?}", self.train_fraction),
            format!("{:?}", self.val_fraction),
            format!("{:?}", self.test_fraction),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "lr" => self.lr = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "batch_size" => self.batch_size = value.parse()?,
            "dropout" => self.dropout = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "sage_depth" => self.sage_depth = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "head_hidden" => {
                self.head_hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| parse(key, w.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "gamma" => self.gamma = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "normalize" => self.normalize = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "class_weighting" => self.class_weighting = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            _ => return Err(format!("unknown configuration key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite".into());
        }
        self.model_config(1, 1).validate()
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.train_fraction, self.val_fraction, self.test_fraction)
    }

    pub fn high_order(&self) -> HighOrderConfig {
        HighOrderConfig::new(self.layers, self.mode, self.normalize)
    }

    pub fn model_config(&self, in_dim: usize, relations: usize) -> ModelConfig {
        ModelConfig {
            in_dim,
            hidden_dim: self.hidden_dim,
            orders: self.layers,
            sage_depth: self.sage_depth,
            head_hidden: self.head_hidden.clone(),
            relations,
            gamma: self.gamma,
            dropout: self.dropout,
        }
    }
}

//! Synthetic camouflage graphs: fraud rings whose members only reach each
//! other through chains of benign intermediaries.
//!
//! Node layout: benign backbone `0..n_benign`, then the fraud nodes ring by
//! ring, then the intermediaries. Intermediaries belong to exactly one
//! fraud–fraud path and are not attached to the backbone, so every fraud pair
//! of a ring sits at distance exactly `depth + 1`.

use std::collections::HashSet;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, LabelVector, MultiRelationGraph, RelationGraph, BENIGN, FRAUD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CamouflageSpec {
    pub n_benign: usize,
    pub n_rings: usize,
    pub ring_size: usize,
    /// Benign intermediaries on each fraud–fraud path.
    pub depth: usize,
    /// Expected backbone edges per benign node.
    pub benign_density: f64,
    pub feature_dim: usize,
    /// Distance between the two class means.
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for CamouflageSpec {
    fn default() -> Self {
        Self {
            n_benign: 2000,
            n_rings: 40,
            ring_size: 4,
            depth: 3,
            benign_density: 3.0,
            feature_dim: 8,
            class_separation: 1.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

impl CamouflageSpec {
    pub const KEYS: [&'static str; 9] = [
        "n_benign",
        "n_rings",
        "ring_size",
        "depth",
        "benign_density",
        "feature_dim",
        "class_separation",
        "noise_sigma",
        "seed",
    ];

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.n_benign.to_string(),
            self.n_rings.to_string(),
            self.ring_size.to_string(),
            self.depth.to_string(),
            format!("{:?}", self.benign_density),
            self.feature_dim.to_string(),
            format!("{:?}", self.class_separation),
            format!("{:?}", self.noise_sigma),
            self.seed.to_string(),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "n_benign" => self.n_benign = parse(key, value)?,
            "n_rings" => self.n_rings = parse(key, value)?,
            "ring_size" => self.ring_size = parse(key, value)?,
            "depth" => self.depth = parse(key, value)?,
            "benign_density" => self.benign_density = parse(key, value)?,
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "class_separation" => self.class_separation = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(format!("unknown spec key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n_benign == 0 || self.n_rings == 0 || self.feature_dim == 0 {
            return bad("n_benign, n_rings and feature_dim must be at least 1".into());
        }
        if self.ring_size < 2 {
            return bad(format!("ring_size must be at least 2, got {}", self.ring_size));
        }
        let pairs = self.n_benign * (self.n_benign - 1) / 2;
        if self.benign_density.is_nan() || self.benign_density < 0.0 || self.backbone_edges() > pairs {
            return bad(format!(
                "benign_density {} needs more backbone edges than {} nodes allow",
                self.benign_density, self.n_benign
            ));
        }
        for (name, v) in [("class_separation", self.class_separation), ("noise_sigma", self.noise_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    fn backbone_edges(&self) -> usize {
        (self.benign_density * self.n_benign as f64).round() as usize
    }

    fn pairs_per_ring(&self) -> usize {
        self.ring_size * (self.ring_size - 1) / 2
    }

    pub fn n_fraud(&self) -> usize {
        self.n_rings * self.ring_size
    }

    pub fn n_intermediaries(&self) -> usize {
        self.n_rings * self.pairs_per_ring() * self.depth
    }

    pub fn n_nodes(&self) -> usize {
        self.n_benign + self.n_fraud() + self.n_intermediaries()
    }

    /// Fraud nodes of ring `i`.
    pub fn ring(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.n_benign + i * self.ring_size;
        start..start + self.ring_size
    }
}

/// Structural facts that hold for every graph generated from a spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub n_nodes: usize,
    pub n_fraud: usize,
    pub n_intermediaries: usize,
    pub backbone_edges: usize,
    /// Shortest-path distance between two fraud nodes of one ring.
    pub fraud_pair_distance: usize,
    /// Homophily of every fraud node: 0 when intermediaries separate the
    /// ring, 1 when ring members are adjacent.
    pub fraud_homophily: f64,
}

pub fn describe(spec: &CamouflageSpec) -> StructureReport {
    StructureReport {
        n_nodes: spec.n_nodes(),
        n_fraud: spec.n_fraud(),
        n_intermediaries: spec.n_intermediaries(),
        backbone_edges: spec.backbone_edges(),
        fraud_pair_distance: spec.depth + 1,
        fraud_homophily: if spec.depth == 0 { 1.0 } else { 0.0 },
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub graphs: MultiRelationGraph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
}

pub fn generate(spec: &CamouflageSpec) -> Result<SyntheticGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_nodes();
    let nb = spec.n_benign;

    let target = spec.backbone_edges();
    let mut seen = HashSet::with_capacity(target);
    let mut edges = Vec::with_capacity(target + spec.n_intermediaries() + spec.n_rings * spec.pairs_per_ring());
    while seen.len() < target {
        let u = rng.random_range(0..nb);
        let v = rng.random_range(0..nb);
        if u != v && seen.insert((u.min(v), u.max(v))) {
            edges.push((u.min(v), u.max(v)));
        }
    }

    let mut next = nb + spec.n_fraud();
    for ring in 0..spec.n_rings {
        let members = spec.ring(ring);
        for a in members.clone() {
            for b in a + 1..members.end {
                let mut prev = a;
                for _ in 0..spec.depth {
                    edges.push((prev, next));
                    prev = next;
                    next += 1;
                }
                edges.push((prev, b));
            }
        }
    }
    let graph = RelationGraph::from_edges(&edges, n, true)?;

    let mut labels = vec![BENIGN; n];
    labels[nb..nb + spec.n_fraud()].fill(FRAUD);

    let mut direction = Array1::from_shape_simple_fn(spec.feature_dim, || rng.sample::<f64, _>(StandardNormal));
    let norm = direction.dot(&direction).sqrt();
    direction /= norm;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InfeasibleSpec(e.to_string()))?;
    let half = spec.class_separation / 2.0;
    let mut x = Array2::<f64>::zeros((n, spec.feature_dim));
    for (v, mut row) in x.rows_mut().into_iter().enumerate() {
        let sign = if labels[v] == FRAUD { 1.0 } else { -1.0 };
        for (j, e) in row.iter_mut().enumerate() {
            *e = sign * half * direction[j] + noise.sample(&mut rng);
        }
    }

    Ok(SyntheticGraph {
        graphs: MultiRelationGraph::single(graph, "transactions"),
        features: FeatureMatrix::new(x)?,
        labels: LabelVector::from_binary(&labels)?,
    })
}

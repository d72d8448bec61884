//! Sparse relation graphs, dense feature/label containers and node homophily.
//!
//! Adjacency is stored in compressed sparse row (CSR) form. For node `u`, its
//! neighbors are `indices[offsets[u]..offsets[u + 1]]` (strictly increasing)
//! with weights `values[offsets[u]..offsets[u + 1]]`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BENIGN: u8 = 0;
pub const FRAUD: u8 = 1;

/// One relation's adjacency in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    normalized: bool,
}

impl RelationGraph {
    /// Builds a binary adjacency from an edge list.
    ///
    /// Rows come out sorted and deduplicated; self-loops are dropped. With
    /// `symmetrize`, every edge `(u, v)` also contributes `(v, u)`.
    pub fn from_edges(edges: &[(usize, usize)], n: usize, symmetrize: bool) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::NodeOutOfRange { u, v, n });
            }
            if u == v {
                continue;
            }
            rows[u].push(v);
            if symmetrize {
                rows[v].push(u);
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            offsets.push(indices.len());
        }
        let values = vec![1.0; indices.len()];
        Ok(Self {
            n,
            offsets,
            indices,
            values,
            normalized: false,
        })
    }

    /// Wraps raw CSR arrays after checking the structural invariants.
    pub fn from_csr(
        n: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != n + 1 {
            return Err(Error::InvalidGraph(format!(
                "row offsets have length {}, expected {}",
                offsets.len(),
                n + 1
            )));
        }
        if offsets[0] != 0 || offsets[n] != indices.len() {
            return Err(Error::InvalidGraph(
                "first offset must be 0 and last offset must equal the entry count".into(),
            ));
        }
        if values.len() != indices.len() {
            return Err(Error::InvalidGraph(
                "values and column indices differ in length".into(),
            ));
        }
        for u in 0..n {
            if offsets[u] > offsets[u + 1] {
                return Err(Error::InvalidGraph(format!("row offsets decrease at row {u}")));
            }
            let row = &indices[offsets[u]..offsets[u + 1]];
            if row.iter().any(|&c| c >= n) {
                return Err(Error::InvalidGraph(format!("column index out of range in row {u}")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "column indices of row {u} are not strictly increasing"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graph values".into()));
        }
        Ok(Self {
            n,
            offsets,
            indices,
            values,
            normalized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.indices[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn row_values(&self, u: usize) -> &[f64] {
        &self.values[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Rescales every nonempty row to sum to one. Empty rows stay empty.
    pub fn row_normalize(&self) -> Self {
        let mut values = self.values.clone();
        for u in 0..self.n {
            let row = &mut values[self.offsets[u]..self.offsets[u + 1]];
            let sum: f64 = row.iter().sum();
            if row.is_empty() || sum == 0.0 {
                continue;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        Self {
            n: self.n,
            offsets: self.offsets.clone(),
            indices: self.indices.clone(),
            values,
            normalized: true,
        }
    }

    /// The transposed matrix, used to back-propagate through a sparse product.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows are visited in increasing order, so each transposed row comes out sorted
        for u in 0..self.n {
            for k in self.offsets[u]..self.offsets[u + 1] {
                let c = self.indices[k];
                indices[cursor[c]] = u;
                values[cursor[c]] = self.values[k];
                cursor[c] += 1;
            }
        }
        Self {
            n: self.n,
            offsets,
            indices,
            values,
            normalized: false,
        }
    }

    /// Sparse-dense product `A · X` in O(nnz · d).
    ///
    /// Each output row is reduced sequentially in column order, so the result
    /// is bitwise reproducible.
    pub fn spmm(&self, dense: &Array2<f64>) -> Result<Array2<f64>> {
        let (rows, d) = dense.dim();
        if rows != self.n {
            return Err(Error::dims("spmm", format!("{} rows", self.n), format!("{rows} rows")));
        }
        let mut out = Array2::<f64>::zeros((self.n, d));
        let src = dense.as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("freshly allocated");
        for u in 0..self.n {
            let out_row = &mut dst[u * d..(u + 1) * d];
            for k in self.offsets[u]..self.offsets[u + 1] {
                let w = self.values[k];
                let c = self.indices[k];
                let in_row = &src[c * d..(c + 1) * d];
                for (o, &x) in out_row.iter_mut().zip(in_row) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// Dense copy of the adjacency, for small-graph diagnostics.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for u in 0..self.n {
            for (&c, &w) in self.neighbors(u).iter().zip(self.row_values(u)) {
                a[[u, c]] = w;
            }
        }
        a
    }

    /// Undirected edges `(u, v)` with `u < v`, in row-major order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.nnz() / 2);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges
    }

    /// Whether entry `(u, v)` is present exactly when `(v, u)` is.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|u| {
            self.neighbors(u)
                .iter()
                .all(|&v| self.neighbors(v).binary_search(&u).is_ok())
        })
    }
}

/// `R` relations over a shared node set.
#[derive(Clone, Debug)]
pub struct MultiRelationGraph {
    relations: Vec<RelationGraph>,
    names: Vec<String>,
}

impl MultiRelationGraph {
    pub fn new(relations: Vec<RelationGraph>, names: Vec<String>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::InvalidGraph("at least one relation is required".into()));
        }
        if names.len() != relations.len() {
            return Err(Error::InvalidGraph("one name per relation is required".into()));
        }
        let n = relations[0].n();
        if relations.iter().any(|g| g.n() != n) {
            return Err(Error::InvalidGraph("relations disagree on the node count".into()));
        }
        Ok(Self { relations, names })
    }

    pub fn single(graph: RelationGraph, name: impl Into<String>) -> Self {
        Self {
            relations: vec![graph],
            names: vec![name.into()],
        }
    }

    pub fn n(&self) -> usize {
        self.relations[0].n()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn relations(&self) -> &[RelationGraph] {
        &self.relations
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn relation(&self, name: &str) -> Option<&RelationGraph> {
        self.names
            .iter()
            .position(|s| s == name)
            .map(|i| &self.relations[i])
    }
}

/// Dense `n × d` node features with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self(data.as_standard_layout().into_owned()))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Per-node labels: `Some(0)` benign, `Some(1)` fraud, `None` unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector(Vec<Option<u8>>);

impl LabelVector {
    pub fn new(labels: Vec<Option<u8>>) -> Result<Self> {
        for (node, l) in labels.iter().enumerate() {
            if let Some(l) = *l {
                if l > 1 {
                    return Err(Error::InvalidLabel {
                        node,
                        label: l as i64,
                    });
                }
            }
        }
        Ok(Self(labels))
    }

    pub fn from_binary(labels: &[u8]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| Some(l)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> Option<u8> {
        self.0[v]
    }

    pub fn as_slice(&self) -> &[Option<u8>] {
        &self.0
    }

    pub fn labeled(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(v, l)| l.map(|l| (v, l)))
    }

    pub fn nodes_of(&self, class: u8) -> Vec<usize> {
        self.labeled()
            .filter(|&(_, l)| l == class)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn count(&self, class: u8) -> usize {
        self.0.iter().filter(|l| **l == Some(class)).count()
    }

    /// Labels of `nodes` as 0/1 targets; every node must be labeled.
    pub fn targets(&self, nodes: &[usize]) -> Result<Vec<u8>> {
        nodes
            .iter()
            .map(|&v| self.0[v].ok_or(Error::UnlabeledNode(v)))
            .collect()
    }
}

/// Disjoint train/validation/test node sets covering the labeled nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Fraction of `v`'s labeled neighbors that share its label.
///
/// Unlabeled neighbors count in neither numerator nor denominator. `None`
/// means the node has no labeled neighbor.
pub fn node_homophily(g: &RelationGraph, labels: &LabelVector, v: usize) -> Result<Option<f64>> {
    let own = labels.get(v).ok_or(Error::UnlabeledNode(v))?;
    Ok(label_agreement(g.neighbors(v).iter().copied(), labels, own))
}

pub(crate) fn label_agreement(
    nodes: impl Iterator<Item = usize>,
    labels: &LabelVector,
    own: u8,
) -> Option<f64> {
    let (mut same, mut total) = (0usize, 0usize);
    for u in nodes {
        if let Some(l) = labels.get(u) {
            total += 1;
            if l == own {
                same += 1;
            }
        }
    }
    (total > 0).then(|| same as f64 / total as f64)
}

/// Fixed-width histogram over `[0, 1]`; the value 1.0 falls in the last bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        Self {
            counts: vec![0; bins],
        }
    }

    pub fn from_values(bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::new(bins);
        for x in values {
            h.add(x);
        }
        h
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        ((x * self.bins() as f64).floor() as usize).min(self.bins() - 1)
    }

    pub fn add(&mut self, x: f64) {
        let b = self.bin_of(x);
        self.counts[b] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.bins() as f64
    }

    /// Center of the most populated bin (lowest bin on ties).
    pub fn mode(&self) -> Option<f64> {
        if self.total() == 0 {
            return None;
        }
        let mut best = 0;
        for (b, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = b;
            }
        }
        Some(self.bin_center(best))
    }
}

/// Homophily of a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHomophily {
    pub histogram: Histogram,
    /// Labeled nodes of this class whose homophily is undefined.
    pub undefined: usize,
    pub mean: Option<f64>,
}

impl ClassHomophily {
    pub(crate) fn from_values(bins: usize, values: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self {
            histogram: Histogram::from_values(bins, defined.iter().copied()),
            undefined: values.len() - defined.len(),
            mean,
        }
    }

    pub fn mode(&self) -> Option<f64> {
        self.histogram.mode()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    /// Per-node homophily; `None` for unlabeled nodes and for nodes with no labeled neighbor.
    pub per_node: Vec<Option<f64>>,
    pub benign: ClassHomophily,
    pub fraud: ClassHomophily,
}

impl HomophilyReport {
    pub fn class(&self, class: u8) -> &ClassHomophily {
        if class == FRAUD {
            &self.fraud
        } else {
            &self.benign
        }
    }
}

pub fn homophily_distribution(
    g: &RelationGraph,
    labels: &LabelVector,
    bins: usize,
) -> Result<HomophilyReport> {
    if bins < 2 {
        return Err(Error::InvalidConfig("at least two histogram bins are required".into()));
    }
    if labels.len() != g.n() {
        return Err(Error::dims("homophily labels", g.n(), labels.len()));
    }
    if labels.labeled().next().is_none() {
        return Err(Error::NoLabeledNodes);
    }
    let per_node: Vec<Option<f64>> = (0..g.n())
        .map(|v| {
            labels
                .get(v)
                .and_then(|own| label_agreement(g.neighbors(v).iter().copied(), labels, own))
        })
        .collect();
    let class_values = |class: u8| -> Vec<Option<f64>> {
        labels.nodes_of(class).into_iter().map(|v| per_node[v]).collect()
    };
    Ok(HomophilyReport {
        benign: ClassHomophily::from_values(bins, &class_values(BENIGN)),
        fraud: ClassHomophily::from_values(bins, &class_values(FRAUD)),
        per_node,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn p3() -> RelationGraph {
        RelationGraph::from_edges(&[(0, 1), (1, 2)], 3, true).unwrap()
    }

    #[test]
    fn build_p3_symmetrized() {
        let g = p3();
        assert_eq!(g.nnz(), 4);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
        assert!(g.is_structurally_symmetric());
    }

    #[test]
    fn build_dedups_and_drops_self_loops() {
        let g = RelationGraph::from_edges(&[(0, 1), (0, 1), (1, 1)], 2, true).unwrap();
        assert_eq!(g.nnz(), 2);
        assert_eq!(g.values(), &[1.0, 1.0]);
    }

    #[test]
    fn build_rejects_out_of_range() {
        let err = RelationGraph::from_edges(&[(0, 5)], 3, true).unwrap_err();
        assert!(matches!(err, Error::NodeOutOfRange { u: 0, v: 5, n: 3 }));
    }

    #[test]
    fn from_csr_validates() {
        assert!(RelationGraph::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(RelationGraph::from_csr(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(RelationGraph::from_csr(2, vec![0, 1, 2], vec![1, 2], vec![1.0, 1.0]).is_err());
        assert!(RelationGraph::from_csr(2, vec![0, 1], vec![1], vec![1.0]).is_err());
    }

    #[test]
    fn normalize_p3_and_isolated() {
        let g = RelationGraph::from_edges(&[(0, 1), (1, 2)], 4, true)
            .unwrap()
            .row_normalize();
        assert!(g.is_normalized());
        assert_eq!(g.row_values(1), &[0.5, 0.5]);
        assert_eq!(g.degree(3), 0);
        let again = g.row_normalize();
        for (a, b) in again.values().iter().zip(g.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn spmm_hand_product() {
        let x = array![[1.0], [2.0], [3.0]];
        assert_eq!(p3().spmm(&x).unwrap(), array![[2.0], [4.0], [2.0]]);
    }

    #[test]
    fn spmm_identity_graph() {
        let eye = RelationGraph::from_csr(3, vec![0, 1, 2, 3], vec![0, 1, 2], vec![1.0; 3]).unwrap();
        let x = array![[1.0, -2.0], [0.5, 3.0], [7.0, 0.0]];
        assert_eq!(eye.spmm(&x).unwrap(), x);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let x = Array2::<f64>::zeros((2, 1));
        assert!(matches!(p3().spmm(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn transpose_round_trips() {
        let g = RelationGraph::from_edges(&[(0, 1), (2, 1), (3, 0)], 4, false).unwrap();
        let t = g.transpose();
        assert_eq!(t.to_dense(), g.to_dense().t().to_owned());
        assert_eq!(t.transpose().to_dense(), g.to_dense());
    }

    #[test]
    fn homophily_counts_labeled_neighbors_only() {
        // node 0 has neighbors 1, 2, 3 labeled (1, 1, 0) and an unlabeled neighbor 4
        let g = RelationGraph::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)], 6, true).unwrap();
        let labels = LabelVector::new(vec![Some(1), Some(1), Some(1), Some(0), None, Some(0)]).unwrap();
        let h = node_homophily(&g, &labels, 0).unwrap().unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(node_homophily(&g, &labels, 5).unwrap(), None);
        assert!(matches!(node_homophily(&g, &labels, 4), Err(Error::UnlabeledNode(4))));
    }

    #[test]
    fn homophily_two_node_cross_edge() {
        let g = RelationGraph::from_edges(&[(0, 1)], 2, true).unwrap();
        let labels = LabelVector::from_binary(&[1, 0]).unwrap();
        let r = homophily_distribution(&g, &labels, 10).unwrap();
        assert_eq!(r.per_node, vec![Some(0.0), Some(0.0)]);
        assert_eq!(r.fraud.histogram.counts[0], 1);
        assert_eq!(r.benign.histogram.counts[0], 1);
    }

    #[test]
    fn homophily_clique_all_mass_at_one() {
        let edges: Vec<_> = (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v))).collect();
        let g = RelationGraph::from_edges(&edges, 5, true).unwrap();
        let labels = LabelVector::from_binary(&[1; 5]).unwrap();
        let r = homophily_distribution(&g, &labels, 4).unwrap();
        assert_eq!(r.fraud.histogram.counts, vec![0, 0, 0, 5]);
        assert_eq!(r.fraud.mean, Some(1.0));
        assert_eq!(r.benign.histogram.total(), 0);
    }

    #[test]
    fn homophily_distribution_errors() {
        let g = p3();
        let none = LabelVector::new(vec![None; 3]).unwrap();
        assert!(matches!(homophily_distribution(&g, &none, 10), Err(Error::NoLabeledNodes)));
        let labels = LabelVector::from_binary(&[0, 0, 1]).unwrap();
        assert!(homophily_distribution(&g, &labels, 1).is_err());
    }

    #[test]
    fn undefined_nodes_reported_separately() {
        let g = RelationGraph::from_edges(&[(0, 1)], 3, true).unwrap();
        let labels = LabelVector::from_binary(&[0, 0, 1]).unwrap();
        let r = homophily_distribution(&g, &labels, 5).unwrap();
        assert_eq!(r.fraud.undefined, 1);
        assert_eq!(r.fraud.histogram.total(), 0);
        assert_eq!(r.benign.histogram.total(), 2);
    }
}

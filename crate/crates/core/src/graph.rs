//! Ground-truth graphs, degree sequences, node splits and the β-model sampler.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::error::{Error, Result};
use crate::numeric::logistic;
use crate::rng;

/// Symmetric 0/1 adjacency matrix of a simple undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency(BitMatrix);

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self(BitMatrix::new(n))
    }

    /// Builds a graph from undirected edges. Self-loops and repeated pairs are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = Self::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            adj.add_edge(i, j);
        }
        Ok(adj)
    }

    /// Wraps a bit matrix after checking symmetry and the zero diagonal.
    pub fn from_bit_matrix(bits: BitMatrix) -> Result<Self> {
        if !bits.has_zero_diagonal() {
            return Err(Error::data("adjacency matrix has a non-zero diagonal"));
        }
        if !bits.is_symmetric() {
            return Err(Error::data("adjacency matrix is not symmetric"));
        }
        Ok(Self(bits))
    }

    /// Adds the undirected edge `{i, j}`. Returns false for self-loops and existing edges.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        if i == j || self.0.get(i, j) {
            return false;
        }
        self.0.set(i, j, true);
        self.0.set(j, i, true);
        true
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.0.n()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.0.get(i, j)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.0.count_ones() / 2
    }

    /// Entry-wise L1 norm, i.e. twice the edge count.
    pub fn l1_norm(&self) -> usize {
        self.0.count_ones()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.0.row_count_ones(i)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.0.row_ones(i)
    }

    /// Undirected edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.ones().filter(|&(i, j)| i < j)
    }

    pub fn row(&self, i: usize) -> fixedbitset::FixedBitSet {
        self.0.row(i)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.0
    }

    /// Fraction of the `n(n-1)` off-diagonal entries that are set.
    pub fn density(&self) -> f64 {
        let n = self.n() as f64;
        if n < 2.0 {
            return 0.0;
        }
        self.l1_norm() as f64 / (n * (n - 1.0))
    }
}

/// A node-attributed simple undirected graph.
#[derive(Clone, Debug)]
pub struct Graph {
    pub adjacency: Adjacency,
    /// `n x d` feature matrix.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Graph {
    pub fn new(
        adjacency: Adjacency,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let n = adjacency.n();
        if features.nrows() != n {
            return Err(Error::data(format!(
                "feature matrix has {} rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n {
            return Err(Error::data(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::data(format!("label {bad} outside [0, {class_count})")));
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            class_count,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn degree_sequence(&self) -> DegreeSequence {
        degree_sequence(&self.adjacency)
    }
}

/// Per-node degrees. True degrees are integral, noisy ones are real.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DegreeSequence(pub Vec<f64>);

impl DegreeSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub fn degree_sequence(adjacency: &Adjacency) -> DegreeSequence {
    DegreeSequence((0..adjacency.n()).map(|i| adjacency.degree(i) as f64).collect())
}

/// Disjoint train/validation/test node sets covering every node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 2:1:1 split. Validation and test each get `floor(n/4)` nodes, training gets the rest.
pub fn split_nodes(n: usize, seed: u64) -> Result<NodeSplit> {
    if n < 4 {
        return Err(Error::invalid(format!("cannot split {n} nodes; need at least 4")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let quarter = n / 4;
    let train_len = n - 2 * quarter;
    let mut train = order[..train_len].to_vec();
    let mut val = order[train_len..train_len + quarter].to_vec();
    let mut test = order[train_len + quarter..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(NodeSplit { train, val, test })
}

/// Draws a graph where each pair `i < j` is an edge with probability
/// `exp(b_i + b_j) / (1 + exp(b_i + b_j))`, independently.
pub fn sample_beta_model(beta: &[f64], seed: u64) -> Result<Adjacency> {
    let n = beta.len();
    if n < 2 {
        return Err(Error::invalid("the β-model needs at least 2 nodes"));
    }
    let mut rng = rng::seeded(seed);
    let mut adj = Adjacency::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = logistic(beta[i] + beta[j]);
            if rng.random::<f64>() < p {
                adj.add_edge(i, j);
            }
        }
    }
    Ok(adj)
}

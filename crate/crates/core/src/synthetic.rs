//! Synthetic attributed graphs.
//!
//! [`planted_partition`] produces citation-like graphs: communities with a high share
//! of intra-class links, heavy-tailed degrees and sparse bag-of-words features that
//! are only partly informative about the class. [`cora_like`] fixes its parameters to
//! the shape of the Cora citation graph.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_beta_model, Adjacency, Graph};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedPartition {
    /// Nodes per class; the node count is their sum.
    pub class_sizes: Vec<usize>,
    /// Exact number of undirected edges.
    pub edges: usize,
    /// Probability that an edge stays inside its class.
    pub homophily: f64,
    /// Tail index of the Pareto node propensities. Smaller is heavier.
    pub degree_tail: f64,
    pub feature_dim: usize,
    /// Distinct words per node.
    pub words_per_node: usize,
    /// Size of each class's topic vocabulary.
    pub topic_words: usize,
    /// Probability that a word comes from the class topic rather than the whole vocabulary.
    pub topic_mix: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        Self {
            class_sizes: vec![818, 426, 418, 351, 298, 217, 180],
            edges: 5278,
            homophily: 0.81,
            degree_tail: 2.2,
            feature_dim: 1433,
            words_per_node: 18,
            topic_words: 120,
            topic_mix: 0.2,
        }
    }
}

impl PlantedPartition {
    pub fn n(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.class_sizes.len() < 2 || self.class_sizes.contains(&0) {
            return Err(Error::invalid("planted partition needs at least two non-empty classes"));
        }
        if self.edges > n * (n - 1) / 2 {
            return Err(Error::invalid(format!("{} edges do not fit on {n} nodes", self.edges)));
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(0.0..=1.0).contains(&self.topic_mix) {
            return Err(Error::invalid("homophily and topic_mix must lie in [0, 1]"));
        }
        if self.degree_tail <= 1.0 {
            return Err(Error::invalid("degree_tail must exceed 1"));
        }
        if self.words_per_node > self.feature_dim || self.topic_words > self.feature_dim || self.topic_words == 0 {
            return Err(Error::invalid("word counts exceed the feature dimension"));
        }
        let largest = self.class_sizes.iter().max().copied().unwrap_or(0);
        if self.homophily > 0.0 && largest < 2 {
            return Err(Error::invalid("intra-class links need a class with two nodes"));
        }
        Ok(())
    }
}

/// A Cora-shaped graph: 2708 nodes, 7 classes, 1433 binary features, 5278 edges.
pub fn cora_like(seed: u64) -> Graph {
    planted_partition(&PlantedPartition::default(), seed).expect("default parameters are valid")
}

pub fn planted_partition(config: &PlantedPartition, seed: u64) -> Result<Graph> {
    config.validate()?;
    let n = config.n();
    let c = config.class_sizes.len();
    let mut rng = rng::seeded(seed);

    // Class labels in shuffled order so ids carry no information.
    let mut labels: Vec<usize> = config
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &size)| std::iter::repeat_n(k, size))
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);

    let propensity: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            u.powf(-1.0 / config.degree_tail).min(50.0)
        })
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let all = WeightedIndex::new(&propensity).expect("positive weights");
    let within: Vec<Option<WeightedIndex<f64>>> = members
        .iter()
        .map(|m| (m.len() >= 2).then(|| WeightedIndex::new(m.iter().map(|&i| propensity[i])).expect("positive weights")))
        .collect();

    let mut adjacency = Adjacency::empty(n);
    let mut placed = 0;
    while placed < config.edges {
        let i = all.sample(&mut rng);
        let j = if rng.random::<f64>() < config.homophily {
            match &within[labels[i]] {
                Some(w) => members[labels[i]][w.sample(&mut rng)],
                None => continue,
            }
        } else {
            let j = all.sample(&mut rng);
            if labels[j] == labels[i] {
                continue;
            }
            j
        };
        if i != j && adjacency.add_edge(i, j) {
            placed += 1;
        }
    }

    // Topic vocabularies are disjoint slices of a shuffled vocabulary when they fit.
    let mut vocab: Vec<usize> = (0..config.feature_dim).collect();
    rand::seq::SliceRandom::shuffle(vocab.as_mut_slice(), &mut rng);
    let topics: Vec<Vec<usize>> = (0..c)
        .map(|k| {
            (0..config.topic_words)
                .map(|t| vocab[(k * config.topic_words + t) % config.feature_dim])
                .collect()
        })
        .collect();
    let mut features = Array2::zeros((n, config.feature_dim));
    for i in 0..n {
        let mut placed = 0;
        while placed < config.words_per_node {
            let w = if rng.random::<f64>() < config.topic_mix {
                topics[labels[i]][rng.random_range(0..config.topic_words)]
            } else {
                rng.random_range(0..config.feature_dim)
            };
            if features[[i, w]] == 0.0 {
                features[[i, w]] = 1.0;
                placed += 1;
            }
        }
    }
    Graph::new(adjacency, features, labels, c)
}

/// Parameters for a β-model graph with `beta_i` drawn uniformly from `[low, high]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaGraph {
    pub n: usize,
    pub beta_low: f64,
    pub beta_high: f64,
}

impl Default for BetaGraph {
    fn default() -> Self {
        Self {
            n: 500,
            beta_low: -3.0,
            beta_high: -1.0,
        }
    }
}

/// Samples β and then a graph from it. Features are a one-hot encoding of the label,
/// which is 1 for nodes with above-median β and 0 otherwise.
pub fn beta_graph(config: &BetaGraph, seed: u64) -> Result<(Graph, Vec<f64>)> {
    if !(config.beta_low <= config.beta_high) || !config.beta_low.is_finite() || !config.beta_high.is_finite() {
        return Err(Error::invalid("beta range must be finite with low <= high"));
    }
    let mut rng = rng::seeded(rng::derive_seed(seed, &[0]));
    let beta: Vec<f64> = (0..config.n)
        .map(|_| config.beta_low + (config.beta_high - config.beta_low) * rng.random::<f64>())
        .collect();
    let adjacency = sample_beta_model(&beta, rng::derive_seed(seed, &[1]))?;
    let mut sorted = beta.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[config.n / 2];
    let labels: Vec<usize> = beta.iter().map(|&b| usize::from(b >= median)).collect();
    let features = Array2::from_shape_fn((config.n, 2), |(i, k)| if labels[i] == k { 1.0 } else { 0.0 });
    Ok((Graph::new(adjacency, features, labels, 2)?, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cora_like_shape() {
        let g = cora_like(7);
        assert_eq!(g.n(), 2708);
        assert_eq!(g.feature_dim(), 1433);
        assert_eq!(g.class_count, 7);
        assert_eq!(g.adjacency.edge_count(), 5278);
        assert_eq!(g.degree_sequence().sum(), 10556.0);
        assert!(g.adjacency.bits().is_symmetric() && g.adjacency.bits().has_zero_diagonal());
        let mut counts = vec![0; 7];
        for &l in &g.labels {
            counts[l] += 1;
        }
        assert_eq!(counts, vec![818, 426, 418, 351, 298, 217, 180]);
        for i in 0..g.n() {
            assert_eq!(g.features.row(i).sum(), 18.0);
        }
        let intra = g
            .adjacency
            .edges()
            .filter(|&(i, j)| g.labels[i] == g.labels[j])
            .count() as f64
            / 5278.0;
        assert!((0.75..0.9).contains(&intra), "{intra}");
        let max_degree = (0..g.n()).map(|i| g.adjacency.degree(i)).max().unwrap();
        assert!(max_degree > 30);
    }

    #[test]
    fn deterministic() {
        let cfg = PlantedPartition {
            class_sizes: vec![20, 30],
            edges: 60,
            feature_dim: 50,
            words_per_node: 5,
            topic_words: 10,
            ..Default::default()
        };
        let a = planted_partition(&cfg, 3).unwrap();
        let b = planted_partition(&cfg, 3).unwrap();
        assert_eq!(a.adjacency, b.adjacency);
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        let c = planted_partition(&cfg, 4).unwrap();
        assert_ne!(a.adjacency, c.adjacency);
    }

    #[test]
    fn rejects_impossible_configs() {
        let too_dense = PlantedPartition {
            class_sizes: vec![2, 2],
            edges: 7,
            ..Default::default()
        };
        assert!(planted_partition(&too_dense, 0).is_err());
        let bad_mix = PlantedPartition {
            topic_mix: 1.5,
            ..Default::default()
        };
        assert!(planted_partition(&bad_mix, 0).is_err());
    }

    #[test]
    fn beta_graph_labels_split_at_median() {
        let (g, beta) = beta_graph(&BetaGraph::default(), 1).unwrap();
        assert_eq!(g.n(), 500);
        assert_eq!(beta.len(), 500);
        assert!(beta.iter().all(|b| (-3.0..=-1.0).contains(b)));
        assert_eq!(g.labels.iter().filter(|&&l| l == 1).count(), 250);
        let density = g.adjacency.density();
        assert!(density > 0.005 && density < 0.2, "{density}");
    }
}

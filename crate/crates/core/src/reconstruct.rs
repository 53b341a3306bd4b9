//! Estimated graphs built from the posterior, and the comparison baselines.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::dataset::{read_f64s, write_f64s};
use crate::denoiser::PosteriorMatrix;
use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::randomizer::{flip_probability, flip_probability_for, randomized_response, sample_laplace, MessageBatch};
use crate::rng::node_rng;

/// Symmetric weights for the pairs `i < j` that carry a non-zero weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeights {
    pub n: usize,
    /// `(i, j, w)` with `i < j`, sorted by `(i, j)`.
    pub pairs: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    Binary(Adjacency),
    Dense(Array2<f64>),
    Sparse(SparseWeights),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Binary,
    Weighted,
}

/// Which mechanism produced a graph and with what settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mechanism: String,
    pub parameters: BTreeMap<String, String>,
}

impl Provenance {
    fn new(mechanism: &str) -> Self {
        Self {
            mechanism: mechanism.to_string(),
            parameters: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }
}

/// A reconstructed topology: binary, or weighted with entries in `[0, 1]`.
/// Always symmetric with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedGraph {
    pub weights: Weights,
    pub provenance: Provenance,
}

impl EstimatedGraph {
    pub fn n(&self) -> usize {
        match &self.weights {
            Weights::Binary(a) => a.n(),
            Weights::Dense(w) => w.nrows(),
            Weights::Sparse(s) => s.n,
        }
    }

    pub fn kind(&self) -> GraphKind {
        match self.weights {
            Weights::Binary(_) => GraphKind::Binary,
            _ => GraphKind::Weighted,
        }
    }

    pub fn as_binary(&self) -> Option<&Adjacency> {
        match &self.weights {
            Weights::Binary(a) => Some(a),
            _ => None,
        }
    }

    /// Weight of `(i, j)`. Sparse lookups are a binary search.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.weights {
            Weights::Binary(a) => f64::from(u8::from(a.has_edge(i, j))),
            Weights::Dense(w) => w[[i, j]],
            Weights::Sparse(s) => {
                let key = (i.min(j), i.max(j));
                s.pairs
                    .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
                    .map_or(0.0, |k| s.pairs[k].2)
            }
        }
    }

    /// Sum of all entries, counting both orientations.
    pub fn l1_norm(&self) -> f64 {
        match &self.weights {
            Weights::Binary(a) => a.l1_norm() as f64,
            Weights::Dense(w) => w.sum(),
            Weights::Sparse(s) => 2.0 * s.pairs.iter().map(|p| p.2).sum::<f64>(),
        }
    }

    /// Number of unordered pairs with a non-zero weight.
    pub fn support_size(&self) -> usize {
        match &self.weights {
            Weights::Binary(a) => a.edge_count(),
            Weights::Dense(w) => {
                let n = w.nrows();
                (0..n).map(|i| (i + 1..n).filter(|&j| w[[i, j]] != 0.0).count()).sum()
            }
            Weights::Sparse(s) => s.pairs.iter().filter(|p| p.2 != 0.0).count(),
        }
    }

    /// `||W||_1 / (n (n - 1))`.
    pub fn density(&self) -> f64 {
        let n = self.n() as f64;
        if n < 2.0 {
            0.0
        } else {
            self.l1_norm() / (n * (n - 1.0))
        }
    }

    /// `sum_{i,j} |W_ij - A_ij|`.
    pub fn l1_distance(&self, truth: &Adjacency) -> f64 {
        let a = f64::from;
        match &self.weights {
            Weights::Binary(est) => {
                (0..est.n())
                    .map(|i| est.row(i).symmetric_difference(&truth.row(i)).count())
                    .sum::<usize>() as f64
            }
            Weights::Dense(w) => {
                let n = w.nrows();
                (0..n)
                    .into_par_iter()
                    .map(|i| (0..n).map(|j| (w[[i, j]] - a(u8::from(truth.has_edge(i, j)))).abs()).sum::<f64>())
                    .collect::<Vec<f64>>()
                    .iter()
                    .sum()
            }
            Weights::Sparse(s) => {
                // Start from ||A||_1 and correct the stored pairs.
                let mut total = truth.l1_norm() as f64;
                for &(i, j, w) in &s.pairs {
                    let t = a(u8::from(truth.has_edge(i, j)));
                    total += 2.0 * ((w - t).abs() - t);
                }
                total
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match &self.weights {
            Weights::Dense(w) => w.clone(),
            _ => {
                let n = self.n();
                let mut out = Array2::zeros((n, n));
                match &self.weights {
                    Weights::Binary(a) => {
                        for (i, j) in a.edges() {
                            out[[i, j]] = 1.0;
                            out[[j, i]] = 1.0;
                        }
                    }
                    Weights::Sparse(s) => {
                        for &(i, j, w) in &s.pairs {
                            out[[i, j]] = w;
                            out[[j, i]] = w;
                        }
                    }
                    Weights::Dense(_) => unreachable!(),
                }
                out
            }
        }
    }
}

/// Edge wherever the posterior exceeds 1/2.
pub fn blink_hard(p: &PosteriorMatrix) -> EstimatedGraph {
    let n = p.n();
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).filter(|&j| p.get(i, j) > 0.5).collect())
        .collect();
    let mut adj = Adjacency::empty(n);
    for (i, row) in rows.into_iter().enumerate() {
        for j in row {
            adj.add_edge(i, j);
        }
    }
    EstimatedGraph {
        weights: Weights::Binary(adj),
        provenance: Provenance::new("blink_hard").with("threshold", 0.5),
    }
}

/// The posterior itself as aggregation weights.
pub fn blink_soft(p: &PosteriorMatrix) -> EstimatedGraph {
    EstimatedGraph {
        weights: Weights::Dense(p.to_dense()),
        provenance: Provenance::new("blink_soft"),
    }
}

/// Keeps the `round(||P||_1 / 2)` most probable pairs with their posterior as weight.
pub fn blink_hybrid(p: &PosteriorMatrix) -> EstimatedGraph {
    let n = p.n();
    let mut pairs: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j, p.get(i, j))))
        .collect();
    let half_mass: f64 = pairs.iter().map(|t| t.2).sum();
    let k = half_mass.round() as usize;
    let kept = top_k(&mut pairs, k);
    EstimatedGraph {
        weights: Weights::Sparse(SparseWeights { n, pairs: kept }),
        provenance: Provenance::new("blink_hybrid").with("k", k),
    }
}

/// Descending weight, then ascending `(i, j)`.
fn rank(a: &(usize, usize, f64), b: &(usize, usize, f64)) -> Ordering {
    b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1)))
}

/// The `k` best positive entries under [`rank`], re-sorted by `(i, j)`.
fn top_k(items: &mut Vec<(usize, usize, f64)>, k: usize) -> Vec<(usize, usize, f64)> {
    items.retain(|t| t.2 > 0.0);
    if k < items.len() {
        if k == 0 {
            items.clear();
        } else {
            items.select_nth_unstable_by(k - 1, rank);
            items.truncate(k);
        }
    }
    let mut kept = std::mem::take(items);
    kept.sort_unstable_by_key(|t| (t.0, t.1));
    kept
}

fn or_symmetrize(n: usize, directed: impl IntoIterator<Item = (usize, usize)>) -> Adjacency {
    let mut adj = Adjacency::empty(n);
    for (i, j) in directed {
        adj.add_edge(i, j);
    }
    adj
}

/// The randomized bits taken at face value: `Â_ij = Ã_ij OR Ã_ji`.
pub fn baseline_rr(messages: &MessageBatch) -> Result<EstimatedGraph> {
    let noisy = messages.noisy_matrix()?;
    Ok(EstimatedGraph {
        weights: Weights::Binary(or_symmetrize(messages.n(), noisy.ones())),
        provenance: Provenance::new("rr")
            .with("epsilon_adjacency", messages.budget.epsilon_adjacency())
            .with("symmetrization", "or"),
    })
}

/// Randomized response on the lower triangle only, mirrored to the upper triangle.
/// Node `i` reports the bits `j < i` from stream `(seed, i)`.
pub fn baseline_symrr(truth: &Adjacency, epsilon: f64, seed: u64) -> Result<EstimatedGraph> {
    check_epsilon(epsilon)?;
    let n = truth.n();
    let flip = flip_probability_for(epsilon);
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut lower = fixedbitset::FixedBitSet::with_capacity(i);
            for j in truth.neighbors(i).filter(|&j| j < i) {
                lower.insert(j);
            }
            randomized_response(&lower, flip, &mut node_rng(seed, i)).ones().collect()
        })
        .collect();
    let adj = or_symmetrize(n, rows.into_iter().enumerate().flat_map(|(i, r)| r.into_iter().map(move |j| (i, j))));
    Ok(EstimatedGraph {
        weights: Weights::Binary(adj),
        provenance: Provenance::new("symrr").with("epsilon", epsilon),
    })
}

/// Laplace noise on every adjacency entry; the server keeps the
/// `round(sum clamp(Ã, 0, 1))` largest off-diagonal entries and symmetrizes by OR.
pub fn baseline_ldpgcn(truth: &Adjacency, epsilon: f64, seed: u64) -> Result<EstimatedGraph> {
    check_epsilon(epsilon)?;
    let n = truth.n();
    let scale = 1.0 / epsilon;
    let rows: Vec<(f64, Vec<(usize, usize, f64)>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = node_rng(seed, i);
            let mut mass = 0.0;
            let mut entries = Vec::with_capacity(n.saturating_sub(1));
            for j in 0..n {
                let a = f64::from(u8::from(truth.has_edge(i, j)));
                let noisy = a + sample_laplace(scale, &mut rng);
                mass += noisy.clamp(0.0, 1.0);
                if j != i {
                    entries.push((i, j, noisy));
                }
            }
            (mass, entries)
        })
        .collect();
    let mass: f64 = rows.iter().map(|r| r.0).sum();
    let m = mass.round() as usize;
    let mut entries: Vec<(usize, usize, f64)> = rows.into_iter().flat_map(|r| r.1).collect();
    // Unlike top_k, negative noisy entries stay eligible.
    let selected: Vec<(usize, usize)> = if m >= entries.len() {
        entries.iter().map(|t| (t.0, t.1)).collect()
    } else if m == 0 {
        Vec::new()
    } else {
        entries.select_nth_unstable_by(m - 1, rank);
        entries.truncate(m);
        entries.iter().map(|t| (t.0, t.1)).collect()
    };
    Ok(EstimatedGraph {
        weights: Weights::Binary(or_symmetrize(n, selected)),
        provenance: Provenance::new("ldpgcn")
            .with("epsilon", epsilon)
            .with("m", m)
            .with("count", "clamp01")
            .with("symmetrization", "or"),
    })
}

/// Per-node DPRR sampling: node `i` keeps each reported off-diagonal 1-bit with
/// probability `min(1, m_i / ones_i)`, where `m_i` is the noisy degree when one was sent
/// and otherwise the unbiased estimate `(ones_i - n f) / (1 - 2f)`, clamped at zero.
pub fn dprr_retained(messages: &MessageBatch, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = messages.n();
    let flip = flip_probability(&messages.budget);
    let noisy_degrees = messages.noisy_degrees();
    if noisy_degrees.is_none() && flip >= 0.5 {
        return Err(Error::invalid("DPRR needs a degree channel or adjacency budget"));
    }
    Ok(messages
        .messages
        .par_iter()
        .enumerate()
        .map(|(i, msg)| {
            let ones = msg.noisy_row.count_ones(..);
            let estimate = match &noisy_degrees {
                Some(d) => d.values()[i],
                None => (ones as f64 - n as f64 * flip) / (1.0 - 2.0 * flip),
            }
            .max(0.0);
            if ones == 0 {
                return Vec::new();
            }
            let keep = (estimate / ones as f64).min(1.0);
            let mut rng = node_rng(seed, i);
            msg.noisy_row
                .ones()
                .filter(|&j| j != i)
                .filter(|_| keep >= 1.0 || rng.random::<f64>() < keep)
                .collect()
        })
        .collect())
}

/// [`dprr_retained`] symmetrized by OR.
pub fn baseline_dprr(messages: &MessageBatch, seed: u64) -> Result<EstimatedGraph> {
    let rows = dprr_retained(messages, seed)?;
    let adj = or_symmetrize(
        messages.n(),
        rows.into_iter().enumerate().flat_map(|(i, r)| r.into_iter().map(move |j| (i, j))),
    );
    let estimate = if messages.budget.has_degree_channel() { "noisy_degree" } else { "unbiased_rr_count" };
    Ok(EstimatedGraph {
        weights: Weights::Binary(adj),
        provenance: Provenance::new("dprr")
            .with("epsilon", messages.budget.epsilon())
            .with("delta", messages.budget.delta())
            .with("estimate", estimate)
            .with("symmetrization", "or"),
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

pub const ESTIMATE_FORMAT: &str = "blink-estimate-v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateManifest {
    pub format: String,
    pub n: usize,
    pub kind: GraphKind,
    pub provenance: Provenance,
    /// Packed bits for binary graphs, dense `f64` matrix for weighted ones.
    pub data_file: String,
}

pub fn save_estimate(dir: &Path, est: &EstimatedGraph) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let data_file = match est.kind() {
        GraphKind::Binary => "adjacency.bin",
        GraphKind::Weighted => "weights.bin",
    };
    match &est.weights {
        Weights::Binary(a) => std::fs::write(dir.join(data_file), a.bits().to_bytes())?,
        _ => write_f64s(&dir.join(data_file), est.to_dense().iter().copied())?,
    }
    let manifest = EstimateManifest {
        format: ESTIMATE_FORMAT.into(),
        n: est.n(),
        kind: est.kind(),
        provenance: est.provenance.clone(),
        data_file: data_file.into(),
    };
    std::fs::write(dir.join("estimate.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Weighted graphs come back dense.
pub fn load_estimate(dir: &Path) -> Result<EstimatedGraph> {
    let manifest: EstimateManifest = serde_json::from_slice(&std::fs::read(dir.join("estimate.json"))?)?;
    if manifest.format != ESTIMATE_FORMAT {
        return Err(Error::data(format!("unsupported estimate format `{}`", manifest.format)));
    }
    let n = manifest.n;
    let path = dir.join(&manifest.data_file);
    let weights = match manifest.kind {
        GraphKind::Binary => Weights::Binary(Adjacency::from_bit_matrix(BitMatrix::from_bytes(n, &std::fs::read(path)?)?)?),
        GraphKind::Weighted => {
            let w = Array2::from_shape_vec((n, n), read_f64s(&path, n * n)?).expect("n x n");
            for i in 0..n {
                if w[[i, i]] != 0.0 {
                    return Err(Error::data("weighted estimate has a non-zero diagonal"));
                }
                for j in 0..n {
                    if w[[i, j]] != w[[j, i]] || !(0.0..=1.0).contains(&w[[i, j]]) {
                        return Err(Error::data(format!("weighted estimate entry ({i}, {j}) is invalid")));
                    }
                }
            }
            Weights::Dense(w)
        }
    };
    Ok(EstimatedGraph {
        weights,
        provenance: manifest.provenance,
    })
}

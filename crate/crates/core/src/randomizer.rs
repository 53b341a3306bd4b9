//! Node-side ε-link LDP mechanism.
//!
//! Each node splits its budget: `δε` buys a Laplace-noised degree and `(1-δ)ε` buys
//! randomized response over its adjacency row. Both channels draw from the node's own
//! stream, so nodes can be randomized in any order or in parallel.

use std::fs;
use std::path::Path;

use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::dataset::{read_f64s, write_f64s};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, DegreeSequence};
use crate::rng::node_rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    /// `epsilon` must be positive and finite, `delta` in `[0, 1]`.
    ///
    /// Both endpoints of `delta` are accepted: `delta = 1` leaves nothing for the
    /// adjacency row (flip probability 1/2) and `delta = 0` sends no degree at all.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Budget spent on the degree, `δε`.
    pub fn epsilon_degree(&self) -> f64 {
        self.delta * self.epsilon
    }

    /// Budget spent on the adjacency row, `(1-δ)ε`.
    pub fn epsilon_adjacency(&self) -> f64 {
        (1.0 - self.delta) * self.epsilon
    }

    pub fn has_degree_channel(&self) -> bool {
        self.delta > 0.0
    }

    /// Scale of the Laplace noise on the degree, `1/ε_d`.
    pub fn degree_noise_scale(&self) -> Option<f64> {
        self.has_degree_channel().then(|| 1.0 / self.epsilon_degree())
    }
}

/// Probability that randomized response inverts a bit: `1 / (1 + e^{ε_a})`.
pub fn flip_probability(budget: &PrivacyBudget) -> f64 {
    flip_probability_for(budget.epsilon_adjacency())
}

pub fn flip_probability_for(epsilon: f64) -> f64 {
    1.0 / (1.0 + epsilon.exp())
}

/// Inverse CDF of Laplace(0, scale) evaluated at `u` in (0, 1).
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let v = u - 0.5;
    -scale * v.signum() * (1.0 - 2.0 * v.abs()).ln()
}

/// One draw from Laplace(0, scale) by inversion.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    debug_assert!(scale > 0.0);
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    laplace_from_uniform(u, scale)
}

/// What a node sends to the server.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivateMessage {
    pub noisy_row: FixedBitSet,
    /// Absent when the budget has no degree channel (`delta = 0`).
    pub noisy_degree: Option<f64>,
}

/// Randomized response on `row` with flip probability `flip`.
pub fn randomized_response<R: Rng + ?Sized>(row: &FixedBitSet, flip: f64, rng: &mut R) -> FixedBitSet {
    let mut out = row.clone();
    for j in 0..row.len() {
        if rng.random::<f64>() < flip {
            out.toggle(j);
        }
    }
    out
}

/// The node-side mechanism. The degree is taken from the original row, not the flipped one.
pub fn link_ldp<R: Rng + ?Sized>(row: &FixedBitSet, budget: &PrivacyBudget, rng: &mut R) -> PrivateMessage {
    let noisy_row = randomized_response(row, flip_probability(budget), rng);
    let noisy_degree = budget.degree_noise_scale().map(|scale| {
        let degree = row.count_ones(..) as f64;
        degree + sample_laplace(scale, rng)
    });
    PrivateMessage {
        noisy_row,
        noisy_degree,
    }
}

/// All messages of one release, as received by the server.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageBatch {
    pub budget: PrivacyBudget,
    pub seed: u64,
    pub messages: Vec<PrivateMessage>,
}

impl MessageBatch {
    pub fn n(&self) -> usize {
        self.messages.len()
    }

    /// The noisy adjacency matrix, one row per node.
    pub fn noisy_matrix(&self) -> Result<BitMatrix> {
        BitMatrix::from_rows(self.messages.iter().map(|m| &m.noisy_row))
    }

    pub fn noisy_degrees(&self) -> Option<DegreeSequence> {
        self.messages
            .iter()
            .map(|m| m.noisy_degree)
            .collect::<Option<Vec<_>>>()
            .map(DegreeSequence)
    }
}

/// Runs the mechanism on every node, node `i` using stream `(seed, i)`.
pub fn perturb_graph(adjacency: &Adjacency, budget: &PrivacyBudget, seed: u64) -> MessageBatch {
    let messages = (0..adjacency.n())
        .into_par_iter()
        .map(|i| link_ldp(&adjacency.row(i), budget, &mut node_rng(seed, i)))
        .collect();
    MessageBatch {
        budget: *budget,
        seed,
        messages,
    }
}

pub const MESSAGE_FORMAT: &str = "blink-messages-v1";

/// JSON header stored next to `rows.bin` and `degrees.bin`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MessageHeader {
    pub format: String,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub rows_file: String,
    /// Little-endian f64 per node; NaN when no degree was sent.
    pub degrees_file: String,
}

pub fn save_messages(dir: &Path, batch: &MessageBatch) -> Result<()> {
    fs::create_dir_all(dir)?;
    let header = MessageHeader {
        format: MESSAGE_FORMAT.to_string(),
        n: batch.n(),
        epsilon: batch.budget.epsilon(),
        delta: batch.budget.delta(),
        seed: batch.seed,
        rows_file: "rows.bin".to_string(),
        degrees_file: "degrees.bin".to_string(),
    };
    fs::write(dir.join(&header.rows_file), batch.noisy_matrix()?.to_bytes())?;
    write_f64s(
        &dir.join(&header.degrees_file),
        batch.messages.iter().map(|m| m.noisy_degree.unwrap_or(f64::NAN)),
    )?;
    fs::write(dir.join("header.json"), serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

pub fn load_messages(dir: &Path) -> Result<MessageBatch> {
    let header: MessageHeader = serde_json::from_slice(
        &fs::read(dir.join("header.json"))
            .map_err(|e| Error::from(e).context(format!("reading {}/header.json", dir.display())))?,
    )?;
    if header.format != MESSAGE_FORMAT {
        return Err(Error::data(format!("unsupported message format `{}`", header.format)));
    }
    let budget = PrivacyBudget::new(header.epsilon, header.delta)?;
    let rows = BitMatrix::from_bytes(header.n, &fs::read(dir.join(&header.rows_file))?)?;
    let degrees = read_f64s(&dir.join(&header.degrees_file), header.n)?;
    if budget.has_degree_channel() && degrees.iter().any(|d| !d.is_finite()) {
        return Err(Error::data("missing noisy degree although delta > 0"));
    }
    let messages = degrees
        .into_iter()
        .enumerate()
        .map(|(i, d)| PrivateMessage {
            noisy_row: rows.row(i),
            noisy_degree: budget.has_degree_channel().then_some(d),
        })
        .collect();
    Ok(MessageBatch {
        budget,
        seed: header.seed,
        messages,
    })
}

//! Link-level local differential privacy for graph neural network training.
//!
//! Each node randomizes its adjacency row and, optionally, its degree before
//! release. The server estimates a β-model prior from the noisy degrees, combines
//! it with the randomized bits into posterior link probabilities and builds a graph
//! from them for training a GCN.

pub mod bitmatrix;
pub mod cli;
pub mod dataset;
pub mod denoiser;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod numeric;
pub mod reconstruct;
pub mod randomizer;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};

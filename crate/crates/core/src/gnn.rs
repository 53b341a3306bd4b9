//! Two-layer MLP and GCN node classifiers with hand-written gradients.
//!
//! Both models compute `S relu(S X W1 + b1) W2 + b2` where `S` is the normalized
//! propagation matrix. For the MLP `S = I`. For a graph with weights `W` (0/1 for a
//! binary graph) it is `D^-1/2 (W + I) D^-1/2` with `D` the row sums of `W + I`.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::CsMat;

use crate::error::{Error, Result};
use crate::graph::{Adjacency, NodeSplit};
use crate::reconstruct::{EstimatedGraph, Weights};
use crate::rng::{derive_seed, seeded};

/// The normalized aggregation operator.
#[derive(Clone, Debug)]
pub enum Propagation {
    /// No aggregation; the MLP.
    Identity(usize),
    Sparse(CsMat<f64>),
    Dense(Array2<f64>),
}

impl Propagation {
    pub fn identity(n: usize) -> Self {
        Self::Identity(n)
    }

    /// `1 / sqrt((1 + deg_i)(1 + deg_j))` on edges and the diagonal.
    pub fn from_adjacency(adj: &Adjacency) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..adj.n())
            .map(|i| adj.neighbors(i).map(|j| (j, 1.0)).collect())
            .collect();
        Self::from_weighted_rows(rows)
    }

    /// Binary and sparse estimates stay sparse; dense weights use the dense path.
    pub fn from_estimate(est: &EstimatedGraph) -> Self {
        match &est.weights {
            Weights::Binary(adj) => Self::from_adjacency(adj),
            Weights::Dense(w) => Self::from_dense_weights(w),
            Weights::Sparse(s) => {
                let mut rows = vec![Vec::new(); s.n];
                for &(i, j, w) in &s.pairs {
                    if w != 0.0 {
                        rows[i].push((j, w));
                        rows[j].push((i, w));
                    }
                }
                for row in &mut rows {
                    row.sort_unstable_by_key(|e| e.0);
                }
                Self::from_weighted_rows(rows)
            }
        }
    }

    /// `P + I` normalized by `1 / sqrt(r_i r_j)` with `r` the row sums of `P + I`.
    pub fn from_dense_weights(w: &Array2<f64>) -> Self {
        let n = w.nrows();
        let mut s = w.clone();
        for i in 0..n {
            s[[i, i]] += 1.0;
        }
        let scale: Array1<f64> = s.sum_axis(Axis(1)).mapv(|r| 1.0 / r.sqrt());
        for ((i, j), v) in s.indexed_iter_mut() {
            *v *= scale[i] * scale[j];
        }
        Self::Dense(s)
    }

    /// Off-diagonal `(column, weight)` lists sorted by column; self-loops are added here.
    /// Past one nonzero in eight the dense product is faster, so the result is dense.
    fn from_weighted_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let scale: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 / (1.0 + r.iter().map(|e| e.1).sum::<f64>()).sqrt())
            .collect();
        let nnz = n + rows.iter().map(Vec::len).sum::<usize>();
        if nnz.saturating_mul(8) > n * n {
            let mut s = Array2::zeros((n, n));
            for (i, row) in rows.iter().enumerate() {
                s[[i, i]] = scale[i] * scale[i];
                for &(j, w) in row {
                    s[[i, j]] = w * scale[i] * scale[j];
                }
            }
            return Self::Dense(s);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut diagonal_done = false;
            for &(j, w) in row {
                if !diagonal_done && j > i {
                    indices.push(i);
                    data.push(scale[i] * scale[i]);
                    diagonal_done = true;
                }
                indices.push(j);
                data.push(w * scale[i] * scale[j]);
            }
            if !diagonal_done {
                indices.push(i);
                data.push(scale[i] * scale[i]);
            }
            indptr.push(indices.len());
        }
        Self::Sparse(CsMat::new((n, n), indptr, indices, data))
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Sparse(s) => s.rows(),
            Self::Dense(d) => d.nrows(),
        }
    }

    /// `S m`. `S` is symmetric, so this is also the backward product.
    pub fn apply(&self, m: &Array2<f64>) -> Array2<f64> {
        match self {
            Self::Identity(_) => m.clone(),
            Self::Sparse(s) => sparse_times(s, m),
            Self::Dense(d) => d.dot(m),
        }
    }
}

/// CSR times a row-major dense matrix, one output row at a time. Much faster than the
/// generic product when rows of `m` are short.
fn sparse_times(s: &CsMat<f64>, m: &Array2<f64>) -> Array2<f64> {
    let m = m.as_standard_layout();
    let k = m.ncols();
    let src = m.as_slice().expect("standard layout");
    let mut out = Array2::zeros((s.rows(), k));
    let dst = out.as_slice_mut().expect("fresh array");
    for (i, row) in s.outer_iterator().enumerate() {
        let acc = &mut dst[i * k..(i + 1) * k];
        for (j, &v) in row.iter() {
            for (a, &x) in acc.iter_mut().zip(&src[j * k..(j + 1) * k]) {
                *a += v * x;
            }
        }
    }
    out
}

/// Sparse node features, optionally row-normalized to sum 1.
#[derive(Clone, Debug)]
pub struct Features {
    x: CsMat<f64>,
}

impl Features {
    pub fn new(x: &Array2<f64>, row_normalize: bool) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for row in x.rows() {
            let total: f64 = row.sum();
            let scale = if row_normalize && total != 0.0 { 1.0 / total } else { 1.0 };
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v * scale);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            x: CsMat::new((x.nrows(), x.ncols()), indptr, indices, data),
        }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    fn times(&self, w: &Array2<f64>) -> Array2<f64> {
        &self.x * w
    }

    fn transpose_times(&self, g: &Array2<f64>) -> Array2<f64> {
        &self.x.transpose_view() * g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub normalize_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            dropout: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 300,
            seed: 0,
            normalize_features: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::invalid("hidden must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Weights and biases of both layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Params {
    /// Uniform in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(input: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
        };
        let w1 = uniform(input, hidden);
        let w2 = uniform(hidden, classes);
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(classes),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    /// All parameters as flat slices, in the order `w1, b1, w2, b2`.
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    fn squared_norm(&self) -> f64 {
        self.slices().iter().flat_map(|s| s.iter()).map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

struct Forward {
    /// Pre-activation of the hidden layer.
    hidden_pre: Array2<f64>,
    /// Hidden activations after relu and dropout.
    hidden: Array2<f64>,
    /// Dropout multipliers, when dropout was applied.
    mask: Option<Array2<f64>>,
    logits: Array2<f64>,
}

fn layer_one(params: &Params, prop: &Propagation, features: &Features) -> Array2<f64> {
    prop.apply(&features.times(&params.w1)) + &params.b1
}

/// Inverted-dropout multipliers for the hidden layer.
fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Option<Array2<f64>> {
    (rate > 0.0).then(|| {
        let keep = 1.0 / (1.0 - rate);
        Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < rate { 0.0 } else { keep })
    })
}

fn activate(hidden_pre: &Array2<f64>, mask: Option<&Array2<f64>>) -> Array2<f64> {
    let mut hidden = hidden_pre.mapv(|v| v.max(0.0));
    if let Some(mask) = mask {
        hidden *= mask;
    }
    hidden
}

fn forward(params: &Params, prop: &Propagation, features: &Features, dropout: Option<(f64, &mut ChaCha8Rng)>) -> Forward {
    let hidden_pre = layer_one(params, prop, features);
    let mask = dropout.and_then(|(rate, rng)| dropout_mask(hidden_pre.dim(), rate, rng));
    let hidden = activate(&hidden_pre, mask.as_ref());
    let logits = prop.apply(&hidden.dot(&params.w2)) + &params.b2;
    Forward {
        hidden_pre,
        hidden,
        mask,
        logits,
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

/// Class scores (logits) with dropout off.
pub fn scores(params: &Params, prop: &Propagation, features: &Features) -> Array2<f64> {
    forward(params, prop, features, None).logits
}

/// Mean cross-entropy over `nodes` plus `weight_decay / 2 * ||theta||^2`, and its gradient.
/// With `dropout` set, the hidden layer is dropped out using the given generator.
pub fn loss_and_gradients(
    params: &Params,
    prop: &Propagation,
    features: &Features,
    labels: &[usize],
    nodes: &[usize],
    weight_decay: f64,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (f64, Params) {
    let fwd = forward(params, prop, features, dropout);
    backward(params, prop, features, labels, nodes, weight_decay, &fwd)
}

fn backward(
    params: &Params,
    prop: &Propagation,
    features: &Features,
    labels: &[usize],
    nodes: &[usize],
    weight_decay: f64,
    fwd: &Forward,
) -> (f64, Params) {
    let probs = softmax(&fwd.logits);
    let count = nodes.len() as f64;
    let mut loss = 0.0;
    let mut grad_logits = Array2::zeros(fwd.logits.raw_dim());
    for &i in nodes {
        loss -= probs[[i, labels[i]]].max(f64::MIN_POSITIVE).ln() / count;
        for k in 0..probs.ncols() {
            grad_logits[[i, k]] = probs[[i, k]] / count;
        }
        grad_logits[[i, labels[i]]] -= 1.0 / count;
    }
    loss += 0.5 * weight_decay * params.squared_norm();

    let b2 = grad_logits.sum_axis(Axis(0));
    let grad_z1 = prop.apply(&grad_logits);
    let w2 = fwd.hidden.t().dot(&grad_z1).as_standard_layout().into_owned();
    let mut grad_hidden = grad_z1.dot(&params.w2.t());
    if let Some(mask) = &fwd.mask {
        grad_hidden *= mask;
    }
    grad_hidden.zip_mut_with(&fwd.hidden_pre, |g, &pre| {
        if pre <= 0.0 {
            *g = 0.0;
        }
    });
    let b1 = grad_hidden.sum_axis(Axis(0));
    let w1 = features
        .transpose_times(&prop.apply(&grad_hidden))
        .as_standard_layout()
        .into_owned();
    let mut grads = Params { w1, b1, w2, b2 };
    for (g, p) in grads.slices_mut().into_iter().zip(params.slices()) {
        for (g, p) in g.iter_mut().zip(p) {
            *g += weight_decay * p;
        }
    }
    (loss, grads)
}

/// Adam with the usual moment constants.
struct Adam {
    rate: f64,
    m: Params,
    v: Params,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    fn new(params: &Params, rate: f64) -> Self {
        Self {
            rate,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params, grads: &Params) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let slots = params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut());
        for (((p, g), m), v) in slots {
            for k in 0..p.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                p[k] -= self.rate * (m[k] / c1) / ((v[k] / c2).sqrt() + EPS);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: f64,
}

/// Parameters from the epoch with the best validation accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: Params,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub normalize_features: bool,
    pub history: Vec<EpochRecord>,
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// `epoch,loss,val_acc` rows.
    pub fn write_history(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "loss", "val_acc"])?;
        for r in &self.history {
            w.write_record([r.epoch.to_string(), r.loss.to_string(), r.val_accuracy.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full-batch training on `split.train`, model selection on `split.val`.
pub fn train(
    prop: &Propagation,
    features: &Features,
    labels: &[usize],
    class_count: usize,
    split: &NodeSplit,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let n = features.n();
    if prop.n() != n || labels.len() != n {
        return Err(Error::invalid(format!(
            "size mismatch: {} features rows, {} graph nodes, {} labels",
            n,
            prop.n(),
            labels.len()
        )));
    }
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::invalid(format!("label {bad} outside [0, {class_count})")));
    }
    let mut params = Params::init(features.dim(), config.hidden, class_count, &mut seeded(derive_seed(config.seed, &[0])));
    let mut dropout_rng = seeded(derive_seed(config.seed, &[1]));
    let mut adam = Adam::new(&params, config.learning_rate);
    let mut best = (params.clone(), 0, f64::NEG_INFINITY);
    let mut history = Vec::with_capacity(config.epochs);
    // Dropout only touches the hidden layer, so the layer-one output computed for
    // validation is also the next step's training input. Validation logits and the next
    // training logits share one propagation over stacked columns.
    let mut hidden_pre = layer_one(&params, prop, features);
    let mut mask = dropout_mask(hidden_pre.dim(), config.dropout, &mut dropout_rng);
    let mut logits = prop.apply(&activate(&hidden_pre, mask.as_ref()).dot(&params.w2)) + &params.b2;
    for epoch in 0..config.epochs {
        let fwd = Forward {
            hidden: activate(&hidden_pre, mask.as_ref()),
            hidden_pre,
            mask,
            logits,
        };
        let (loss, grads) = backward(&params, prop, features, labels, &split.train, config.weight_decay, &fwd);
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::TrainingDivergence { epoch });
        }
        adam.step(&mut params, &grads);

        hidden_pre = layer_one(&params, prop, features);
        mask = if epoch + 1 < config.epochs {
            dropout_mask(hidden_pre.dim(), config.dropout, &mut dropout_rng)
        } else {
            None
        };
        let clean = activate(&hidden_pre, None).dot(&params.w2);
        let val_logits;
        (val_logits, logits) = match &mask {
            Some(m) => {
                let stacked = ndarray::concatenate(Axis(1), &[clean.view(), activate(&hidden_pre, Some(m)).dot(&params.w2).view()])
                    .expect("same row count");
                let both = prop.apply(&stacked);
                (
                    both.slice(ndarray::s![.., ..class_count]).to_owned() + &params.b2,
                    both.slice(ndarray::s![.., class_count..]).to_owned() + &params.b2,
                )
            }
            None => {
                let out = prop.apply(&clean) + &params.b2;
                (out.clone(), out)
            }
        };
        let val_accuracy = accuracy(&val_logits, labels, &split.val);
        history.push(EpochRecord {
            epoch,
            loss,
            val_accuracy,
        });
        if val_accuracy > best.2 {
            best = (params.clone(), epoch, val_accuracy);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::TrainingDivergence { epoch: best.1 });
    }
    Ok(TrainedModel {
        params: best.0,
        best_epoch: best.1,
        best_val_accuracy: best.2,
        normalize_features: config.normalize_features,
        history,
    })
}

/// Index of the largest entry; the lowest index wins ties.
fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn accuracy(scores: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    let correct = nodes.iter().filter(|&&i| argmax(scores.row(i)) == labels[i]).count();
    correct as f64 / nodes.len() as f64
}

/// Fraction of `nodes` whose highest-scoring class is the label.
pub fn evaluate(model: &TrainedModel, prop: &Propagation, features: &Features, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty node set"));
    }
    Ok(accuracy(&scores(&model.params, prop, features), labels, nodes))
}

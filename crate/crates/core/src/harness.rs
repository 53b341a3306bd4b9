//! Experiment sweeps: perturb, denoise, reconstruct, optionally train, and record
//! estimation and utility metrics per grid point and trial.
//!
//! `runs.csv` columns, in order: `mechanism, ablation, epsilon, delta, trial, n,
//! l1_error, mae, estimated_density, true_density, mae_bound, test_accuracy,
//! mle_converged, mle_iterations`. Empty cells mean "not applicable".

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{find_content_pair, load_cache, load_content_format};
use crate::denoiser::{posterior, Ablation, MleOptions, PosteriorMatrix};
use crate::error::{Error, Result};
use crate::gnn::{evaluate, train, Features, ModelConfig, Propagation};
use crate::graph::{split_nodes, Adjacency, Graph};
use crate::randomizer::{perturb_graph, MessageBatch, PrivacyBudget};
use crate::reconstruct::{
    baseline_dprr, baseline_ldpgcn, baseline_rr, baseline_symrr, blink_hard, blink_hybrid, blink_soft, EstimatedGraph,
};
use crate::rng::derive_seed;
use crate::synthetic::{beta_graph, planted_partition, BetaGraph, PlantedPartition};

/// Anything that can be compared entrywise with an adjacency matrix.
pub trait PairWeights {
    fn order(&self) -> usize;
    /// `sum_{i,j} |W_ij - A_ij|`.
    fn l1_distance_to(&self, truth: &Adjacency) -> f64;
}

impl PairWeights for PosteriorMatrix {
    fn order(&self) -> usize {
        self.n()
    }

    fn l1_distance_to(&self, truth: &Adjacency) -> f64 {
        self.l1_distance(truth)
    }
}

impl PairWeights for EstimatedGraph {
    fn order(&self) -> usize {
        self.n()
    }

    fn l1_distance_to(&self, truth: &Adjacency) -> f64 {
        self.l1_distance(truth)
    }
}

impl PairWeights for Array2<f64> {
    fn order(&self) -> usize {
        self.nrows()
    }

    fn l1_distance_to(&self, truth: &Adjacency) -> f64 {
        self.indexed_iter()
            .map(|((i, j), w)| (w - f64::from(u8::from(truth.has_edge(i, j)))).abs())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mae {
    pub l1_error: f64,
    pub mae: f64,
}

/// `||W - A||_1` and the same divided by `n^2`.
pub fn mae(estimate: &impl PairWeights, truth: &Adjacency) -> Result<Mae> {
    let n = truth.n();
    if estimate.order() != n {
        return Err(Error::invalid(format!("estimate has order {} but the graph has {n} nodes", estimate.order())));
    }
    let l1_error = estimate.l1_distance_to(truth);
    let mae = if n == 0 { 0.0 } else { l1_error / (n * n) as f64 };
    Ok(Mae { l1_error, mae })
}

/// Upper bound on the expected `||P - A||_1`: `2 ||A||_1 + n / (2 epsilon_d)`.
pub fn mae_bound(truth: &Adjacency, epsilon_degree: f64) -> Result<f64> {
    if !(epsilon_degree > 0.0) {
        return Err(Error::invalid(format!("epsilon_d must be positive, got {epsilon_degree}")));
    }
    Ok(2.0 * truth.l1_norm() as f64 + truth.n() as f64 / (2.0 * epsilon_degree))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Features only.
    Mlp,
    /// GCN on the true graph.
    Gcn,
    BlinkHard,
    BlinkSoft,
    BlinkHybrid,
    Rr,
    #[serde(rename = "symrr")]
    SymRr,
    #[serde(rename = "ldpgcn")]
    LdpGcn,
    Dprr,
}

impl Mechanism {
    pub const ALL: [Mechanism; 9] = [
        Mechanism::Mlp,
        Mechanism::Gcn,
        Mechanism::BlinkHard,
        Mechanism::BlinkSoft,
        Mechanism::BlinkHybrid,
        Mechanism::Rr,
        Mechanism::SymRr,
        Mechanism::LdpGcn,
        Mechanism::Dprr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mlp => "mlp",
            Mechanism::Gcn => "gcn",
            Mechanism::BlinkHard => "blink_hard",
            Mechanism::BlinkSoft => "blink_soft",
            Mechanism::BlinkHybrid => "blink_hybrid",
            Mechanism::Rr => "rr",
            Mechanism::SymRr => "symrr",
            Mechanism::LdpGcn => "ldpgcn",
            Mechanism::Dprr => "dprr",
        }
    }

    pub fn is_blink(self) -> bool {
        matches!(self, Mechanism::BlinkHard | Mechanism::BlinkSoft | Mechanism::BlinkHybrid)
    }

    /// Whether the output depends on the privacy budget at all.
    pub fn is_private(self) -> bool {
        !matches!(self, Mechanism::Mlp | Mechanism::Gcn)
    }

    fn uses_split_messages(self) -> bool {
        self.is_blink() || self == Mechanism::Dprr
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mechanism `{s}`")))
    }
}

/// Where the graph comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// A content/cites pair.
    Content { content: PathBuf, cites: PathBuf },
    /// `<dir>/<name>.content` and `<dir>/<name>.cites`.
    Directory { dir: PathBuf, name: String },
    /// A graph cache written by `save_cache`.
    Cache { dir: PathBuf },
    CoraLike { seed: u64 },
    PlantedPartition {
        #[serde(flatten)]
        params: PlantedPartition,
        seed: u64,
    },
    BetaModel {
        #[serde(flatten)]
        params: BetaGraph,
        seed: u64,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::CoraLike { seed: 0 }
    }
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSpec::Content { content, cites } => Ok(load_content_format(content, cites)?.graph),
            DatasetSpec::Directory { dir, name } => {
                let (content, cites) = find_content_pair(dir, name).ok_or_else(|| {
                    Error::data(format!("no {name}.content/{name}.cites pair in {}", dir.display()))
                })?;
                Ok(load_content_format(&content, &cites)?.graph)
            }
            DatasetSpec::Cache { dir } => Ok(load_cache(dir)?.0),
            DatasetSpec::CoraLike { seed } => planted_partition(&PlantedPartition::default(), *seed),
            DatasetSpec::PlantedPartition { params, seed } => planted_partition(params, *seed),
            DatasetSpec::BetaModel { params, seed } => Ok(beta_graph(params, *seed)?.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    /// Train and evaluate a GCN (or MLP) on every estimate.
    pub train: bool,
    pub model: ModelConfig,
    pub mle: MleOptions,
    pub seed: u64,
    pub ablation: Ablation,
    pub output_dir: Option<PathBuf>,
    /// Trials run concurrently on this many threads.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            mechanisms: vec![Mechanism::BlinkSoft],
            epsilons: (1..=8).map(f64::from).collect(),
            deltas: vec![0.1],
            trials: 10,
            train: false,
            model: ModelConfig::default(),
            mle: MleOptions::default(),
            seed: 0,
            ablation: Ablation::Full,
            output_dir: None,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.mechanisms.is_empty() || self.epsilons.is_empty() || self.deltas.is_empty() {
            return Err(Error::invalid("mechanisms, epsilons and deltas must be non-empty"));
        }
        for &e in &self.epsilons {
            PrivacyBudget::new(e, 0.5)?;
        }
        for &d in &self.deltas {
            PrivacyBudget::new(1.0, d)?;
        }
        if !(self.mle.tolerance > 0.0) || self.mle.max_iters == 0 {
            return Err(Error::invalid("MLE tolerance must be positive and max_iters at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        self.model.validate()
    }
}

/// One mechanism at one grid point in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mechanism: Mechanism,
    pub ablation: Ablation,
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub n: usize,
    pub l1_error: Option<f64>,
    pub mae: Option<f64>,
    pub estimated_density: Option<f64>,
    pub true_density: f64,
    pub mae_bound: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub mle_converged: Option<bool>,
    pub mle_iterations: Option<usize>,
    /// Seconds; kept out of the CSV so that it stays reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

struct Prepared {
    graph: Graph,
    features: Features,
}

/// Seeds for the model and split of a trial; shared by every mechanism and grid point.
fn trial_seeds(config: &ExperimentConfig, trial: usize) -> (u64, u64) {
    (
        derive_seed(config.seed, &[2, config.model.seed, trial as u64]),
        derive_seed(config.seed, &[3, trial as u64]),
    )
}

fn train_and_test(prep: &Prepared, prop: &Propagation, config: &ExperimentConfig, trial: usize) -> Result<f64> {
    let (model_seed, split_seed) = trial_seeds(config, trial);
    let split = split_nodes(prep.graph.n(), split_seed)?;
    let model_config = ModelConfig {
        seed: model_seed,
        ..config.model.clone()
    };
    let g = &prep.graph;
    let model = train(prop, &prep.features, &g.labels, g.class_count, &split, &model_config)?;
    evaluate(&model, prop, &prep.features, &g.labels, &split.test)
}

/// Accuracy of the non-private arms, computed once per trial.
fn control_accuracy(prep: &Prepared, config: &ExperimentConfig, mechanism: Mechanism, trial: usize) -> Result<Option<f64>> {
    if !config.train {
        return Ok(None);
    }
    let prop = match mechanism {
        Mechanism::Mlp => Propagation::identity(prep.graph.n()),
        _ => Propagation::from_adjacency(&prep.graph.adjacency),
    };
    train_and_test(prep, &prop, config, trial).map(Some)
}

fn run_grid_trial(
    prep: &Prepared,
    config: &ExperimentConfig,
    grid: (usize, usize),
    trial: usize,
    controls: &HashMap<(Mechanism, usize), Option<f64>>,
) -> Result<Vec<RunRecord>> {
    let truth = &prep.graph.adjacency;
    let n = truth.n();
    let epsilon = config.epsilons[grid.0];
    let delta = config.deltas[grid.1];
    let budget = PrivacyBudget::new(epsilon, delta)?;
    let noise_seed = derive_seed(config.seed, &[1, grid.0 as u64, grid.1 as u64, trial as u64]);
    let bound = if budget.has_degree_channel() {
        Some(mae_bound(truth, budget.epsilon_degree())?)
    } else {
        None
    };

    let needs_messages = config.mechanisms.iter().any(|m| m.uses_split_messages());
    let messages: Option<MessageBatch> = needs_messages.then(|| perturb_graph(truth, &budget, noise_seed));
    let needs_posterior = config.mechanisms.iter().any(|m| m.is_blink());
    let post: Option<PosteriorMatrix> = match (&messages, needs_posterior) {
        (Some(batch), true) => Some(posterior(batch, &config.mle, config.ablation)?),
        _ => None,
    };

    let mut out = Vec::with_capacity(config.mechanisms.len());
    for (k, &mechanism) in config.mechanisms.iter().enumerate() {
        let start = Instant::now();
        let mech_seed = derive_seed(config.seed, &[4, k as u64, grid.0 as u64, grid.1 as u64, trial as u64]);
        let mut record = RunRecord {
            mechanism,
            ablation: if mechanism.is_blink() { config.ablation } else { Ablation::Full },
            epsilon,
            delta,
            trial,
            n,
            l1_error: None,
            mae: None,
            estimated_density: None,
            true_density: truth.density(),
            mae_bound: bound,
            test_accuracy: None,
            mle_converged: None,
            mle_iterations: None,
            wall_time: 0.0,
        };
        let estimate = match mechanism {
            Mechanism::Mlp | Mechanism::Gcn => {
                record.test_accuracy = controls[&(mechanism, trial)];
                None
            }
            Mechanism::BlinkHard | Mechanism::BlinkSoft | Mechanism::BlinkHybrid => {
                let p = post.as_ref().expect("posterior computed for blink mechanisms");
                if let Some(model) = p.prior() {
                    record.mle_converged = Some(model.converged);
                    record.mle_iterations = Some(model.iterations);
                }
                Some(match mechanism {
                    Mechanism::BlinkHard => blink_hard(p),
                    Mechanism::BlinkSoft => blink_soft(p),
                    _ => blink_hybrid(p),
                })
            }
            // The unsplit baselines spend the whole budget on the adjacency bits.
            Mechanism::Rr => Some(baseline_rr(&perturb_graph(truth, &PrivacyBudget::new(epsilon, 0.0)?, noise_seed))?),
            Mechanism::SymRr => Some(baseline_symrr(truth, epsilon, mech_seed)?),
            Mechanism::LdpGcn => Some(baseline_ldpgcn(truth, epsilon, mech_seed)?),
            Mechanism::Dprr => Some(baseline_dprr(messages.as_ref().expect("messages computed for dprr"), mech_seed)?),
        };
        if let Some(est) = estimate {
            let m = mae(&est, truth)?;
            record.l1_error = Some(m.l1_error);
            record.mae = Some(m.mae);
            record.estimated_density = Some(est.density());
            if config.train {
                record.test_accuracy = Some(train_and_test(prep, &Propagation::from_estimate(&est), config, trial)?);
            }
        }
        record.wall_time = start.elapsed().as_secs_f64();
        out.push(record);
    }
    Ok(out)
}

/// Runs every (mechanism, epsilon, delta, trial) combination of the grid.
///
/// Records come back ordered by mechanism (config order), epsilon, delta and trial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let graph = config.dataset.load().map_err(|e| e.context("loading dataset"))?;
    run_experiment_on(config, graph)
}

/// [`run_experiment`] on an already loaded graph; `config.dataset` is ignored.
pub fn run_experiment_on(config: &ExperimentConfig, graph: Graph) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if graph.n() < 4 {
        return Err(Error::data(format!("experiments need at least 4 nodes, got {}", graph.n())));
    }
    let features = Features::new(&graph.features, config.model.normalize_features);
    let prep = Prepared { graph, features };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    pool.install(|| {
        let mut controls = HashMap::new();
        for &m in config.mechanisms.iter().filter(|m| !m.is_private()) {
            let accs: Vec<Result<Option<f64>>> = (0..config.trials)
                .into_par_iter()
                .map(|t| control_accuracy(&prep, config, m, t))
                .collect();
            for (t, acc) in accs.into_iter().enumerate() {
                controls.insert((m, t), acc.map_err(|e| e.context(format!("{m}, trial {t}")))?);
            }
        }
        let tasks: Vec<(usize, usize, usize)> = (0..config.epsilons.len())
            .flat_map(|e| (0..config.deltas.len()).flat_map(move |d| (0..config.trials).map(move |t| (e, d, t))))
            .collect();
        let results: Vec<Result<Vec<RunRecord>>> = tasks
            .par_iter()
            .map(|&(e, d, t)| {
                run_grid_trial(&prep, config, (e, d), t, &controls).map_err(|err| {
                    err.context(format!(
                        "epsilon={}, delta={}, trial {t}",
                        config.epsilons[e], config.deltas[d]
                    ))
                })
            })
            .collect();
        let mut records = Vec::new();
        for r in results {
            records.extend(r?);
        }
        let position = |m: Mechanism| config.mechanisms.iter().position(|&x| x == m).unwrap_or(usize::MAX);
        let eps_index = |v: f64| config.epsilons.iter().position(|&x| x == v).unwrap_or(usize::MAX);
        let delta_index = |v: f64| config.deltas.iter().position(|&x| x == v).unwrap_or(usize::MAX);
        records.sort_by_key(|r| (position(r.mechanism), eps_index(r.epsilon), delta_index(r.delta), r.trial));
        Ok(records)
    })
}

/// Mean and sample standard deviation (zero for a single value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Stat { mean, std })
    }
}

/// Aggregate over the trials of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mechanism: Mechanism,
    pub ablation: Ablation,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub l1_error: Option<Stat>,
    pub mae: Option<Stat>,
    pub estimated_density: Option<Stat>,
    pub true_density: f64,
    pub mae_bound: Option<f64>,
    pub test_accuracy: Option<Stat>,
    pub wall_time: Option<Stat>,
}

/// Groups records by (mechanism, ablation, epsilon, delta), keeping first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut groups: Vec<Vec<&RunRecord>> = Vec::new();
    for r in records {
        let same = |g: &&mut Vec<&RunRecord>| {
            let h = g[0];
            h.mechanism == r.mechanism && h.ablation == r.ablation && h.epsilon == r.epsilon && h.delta == r.delta
        };
        match groups.iter_mut().find(|g| same(g)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let collect = |f: fn(&RunRecord) -> Option<f64>| Stat::of(&g.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let h = g[0];
            Summary {
                mechanism: h.mechanism,
                ablation: h.ablation,
                epsilon: h.epsilon,
                delta: h.delta,
                trials: g.len(),
                l1_error: collect(|r| r.l1_error),
                mae: collect(|r| r.mae),
                estimated_density: collect(|r| r.estimated_density),
                true_density: h.true_density,
                mae_bound: h.mae_bound,
                test_accuracy: collect(|r| r.test_accuracy),
                wall_time: collect(|r| (r.wall_time > 0.0).then_some(r.wall_time)),
            }
        })
        .collect()
}

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn write_runs(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct SummaryFile<'a, M: Serialize> {
    metadata: &'a M,
    groups: Vec<Summary>,
}

/// Writes `runs.csv` and `summary.json` into `dir`. `metadata` is embedded verbatim.
pub fn report(records: &[RunRecord], dir: &Path, metadata: &impl Serialize) -> Result<(PathBuf, PathBuf)> {
    if records.is_empty() {
        return Err(Error::invalid("no records to report"));
    }
    std::fs::create_dir_all(dir)?;
    let runs = dir.join(RUNS_FILE);
    write_runs(&runs, records)?;
    let summary = dir.join(SUMMARY_FILE);
    let file = SummaryFile {
        metadata,
        groups: summarize(records),
    };
    std::fs::write(&summary, serde_json::to_string_pretty(&file)?)?;
    Ok((runs, summary))
}

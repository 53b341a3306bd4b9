//! Command-line front end. The `blink` binary forwards to [`main_with_args`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::dataset::{find_content_pair, load_cache, load_content_format, save_cache};
use crate::denoiser::{posterior, Ablation, MleOptions};
use crate::error::{Error, Result};
use crate::gnn::{evaluate, train, Features, ModelConfig, Propagation};
use crate::graph::split_nodes;
use crate::harness::{read_runs, report, run_experiment, DatasetSpec, ExperimentConfig, Mechanism};
use crate::randomizer::{load_messages, perturb_graph, save_messages, PrivacyBudget};
use crate::reconstruct::{
    baseline_dprr, baseline_ldpgcn, baseline_rr, baseline_symrr, blink_hard, blink_hybrid, blink_soft, load_estimate,
    save_estimate,
};
use crate::synthetic::{beta_graph, cora_like, BetaGraph};

#[derive(Parser, Debug)]
#[command(name = "blink", version, about = "Link-LDP graph release, denoising and GNN evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a dataset and write it to the graph cache.
    Load(LoadArgs),
    /// Run the node-side randomizer on every node.
    Perturb(PerturbArgs),
    /// Fit the prior and write the posterior.
    Denoise(DenoiseArgs),
    /// Build an estimated graph with one mechanism.
    Reconstruct(ReconstructArgs),
    /// Train and evaluate a GCN or MLP.
    Train(TrainArgs),
    /// Run an experiment grid and write runs.csv and summary.json.
    Sweep(SweepArgs),
    /// Re-aggregate a runs.csv into summary.json.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct LoadArgs {
    #[arg(long, requires = "cites", conflicts_with_all = ["dir", "synthetic"])]
    content: Option<PathBuf>,
    #[arg(long)]
    cites: Option<PathBuf>,
    /// Directory holding `<name>.content` and `<name>.cites`.
    #[arg(long, conflicts_with = "synthetic")]
    dir: Option<PathBuf>,
    #[arg(long, default_value = "cora")]
    name: String,
    /// `cora-like` or `beta`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    /// Graph cache directory.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MleArgs {
    #[arg(long, default_value_t = MleOptions::default().tolerance)]
    tolerance: f64,
    #[arg(long, default_value_t = MleOptions::default().max_iters)]
    max_iters: usize,
    /// full, prior_only or evidence_only.
    #[arg(long, default_value = "full")]
    ablation: String,
}

impl MleArgs {
    fn options(&self) -> Result<(MleOptions, Ablation)> {
        if !(self.tolerance > 0.0) || self.max_iters == 0 {
            return Err(Error::invalid("tolerance must be positive and max-iters at least 1"));
        }
        let options = MleOptions {
            tolerance: self.tolerance,
            max_iters: self.max_iters,
        };
        Ok((options, self.ablation.parse()?))
    }
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long)]
    messages: PathBuf,
    #[command(flatten)]
    mle: MleArgs,
    /// Also write the dense posterior matrix.
    #[arg(long)]
    dense: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    mechanism: String,
    /// Message directory (blink variants, rr, dprr).
    #[arg(long)]
    messages: Option<PathBuf>,
    /// Graph cache (symrr, ldpgcn).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Budget for symrr and ldpgcn.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mle: MleArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// JSON model config; the flags below override it.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    model_seed: Option<u64>,
    /// Use raw features instead of row-normalized ones.
    #[arg(long)]
    raw_features: bool,
}

impl ModelArgs {
    fn apply(&self, mut config: ModelConfig) -> Result<ModelConfig> {
        if let Some(path) = &self.model_config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
            config = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        }
        if let Some(v) = self.hidden {
            config.hidden = v;
        }
        if let Some(v) = self.dropout {
            config.dropout = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            config.weight_decay = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.model_seed {
            config.seed = v;
        }
        if self.raw_features {
            config.normalize_features = false;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Graph cache with features and labels.
    #[arg(long)]
    graph: PathBuf,
    /// Estimated graph to train on instead of the true graph.
    #[arg(long, conflicts_with = "mlp")]
    estimate: Option<PathBuf>,
    /// Ignore links entirely.
    #[arg(long)]
    mlp: bool,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON experiment config; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph cache to use instead of the configured dataset.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    mechanisms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long, conflicts_with = "no_train")]
    train: bool,
    #[arg(long)]
    no_train: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn print(value: serde_json::Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&value).expect("json value"));
}

fn cmd_load(args: LoadArgs) -> Result<()> {
    let (graph, node_ids, class_names, stats) = match (&args.content, &args.dir, &args.synthetic) {
        (Some(content), _, _) => {
            let cites = args.cites.as_ref().expect("clap enforces --cites");
            let ds = load_content_format(content, cites)?;
            (ds.graph, ds.node_ids, ds.class_names, Some(ds.stats))
        }
        (None, Some(dir), _) => {
            let (content, cites) = find_content_pair(dir, &args.name)
                .ok_or_else(|| Error::data(format!("no {0}.content/{0}.cites in {1}", args.name, dir.display())))?;
            let ds = load_content_format(&content, &cites)?;
            (ds.graph, ds.node_ids, ds.class_names, Some(ds.stats))
        }
        (None, None, Some(kind)) => {
            let graph = match kind.as_str() {
                "cora-like" | "cora_like" => cora_like(args.seed),
                "beta" => beta_graph(&BetaGraph::default(), args.seed)?.0,
                other => return Err(Error::invalid(format!("unknown synthetic graph `{other}`"))),
            };
            (graph, Vec::new(), Vec::new(), None)
        }
        _ => return Err(Error::invalid("give --content/--cites, --dir or --synthetic")),
    };
    let manifest = save_cache(&args.out, &graph, &node_ids, &class_names)?;
    print(json!({
        "nodes": graph.n(),
        "features": graph.feature_dim(),
        "classes": graph.class_count,
        "edges": graph.adjacency.edge_count(),
        "cleaning": stats,
        "manifest": manifest,
    }));
    Ok(())
}

fn cmd_perturb(args: PerturbArgs) -> Result<()> {
    let budget = PrivacyBudget::new(args.epsilon, args.delta)?;
    let (graph, _) = load_cache(&args.graph)?;
    let batch = perturb_graph(&graph.adjacency, &budget, args.seed);
    save_messages(&args.out, &batch)?;
    print(json!({
        "nodes": batch.n(),
        "epsilon_degree": budget.epsilon_degree(),
        "epsilon_adjacency": budget.epsilon_adjacency(),
        "out": args.out,
    }));
    Ok(())
}

fn cmd_denoise(args: DenoiseArgs) -> Result<()> {
    let (options, ablation) = args.mle.options()?;
    let batch = load_messages(&args.messages)?;
    let post = posterior(&batch, &options, ablation)?;
    std::fs::create_dir_all(&args.out)?;
    let prior = post.prior();
    std::fs::write(
        args.out.join("prior.json"),
        serde_json::to_string_pretty(&json!({
            "ablation": ablation,
            "flip_probability": post.flip_probability(),
            "prior": prior,
        }))?,
    )?;
    if args.dense {
        post.write_dense(&args.out.join("posterior.bin"))?;
    }
    print(json!({
        "converged": prior.map(|p| p.converged),
        "iterations": prior.map(|p| p.iterations),
        "posterior_mass": post.l1_norm(),
        "out": args.out,
    }));
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let mechanism: Mechanism = args.mechanism.parse()?;
    let need_messages = || {
        args.messages
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{mechanism} needs --messages")))
            .and_then(|dir| load_messages(dir))
    };
    let need_graph = || -> Result<(crate::graph::Graph, f64)> {
        let dir = args.graph.as_ref().ok_or_else(|| Error::invalid(format!("{mechanism} needs --graph")))?;
        let eps = args.epsilon.ok_or_else(|| Error::invalid(format!("{mechanism} needs --epsilon")))?;
        Ok((load_cache(dir)?.0, eps))
    };
    let estimate = match mechanism {
        Mechanism::BlinkHard | Mechanism::BlinkSoft | Mechanism::BlinkHybrid => {
            let (options, ablation) = args.mle.options()?;
            let post = posterior(&need_messages()?, &options, ablation)?;
            match mechanism {
                Mechanism::BlinkHard => blink_hard(&post),
                Mechanism::BlinkSoft => blink_soft(&post),
                _ => blink_hybrid(&post),
            }
        }
        Mechanism::Rr => baseline_rr(&need_messages()?)?,
        Mechanism::Dprr => baseline_dprr(&need_messages()?, args.seed)?,
        Mechanism::SymRr => {
            let (g, eps) = need_graph()?;
            baseline_symrr(&g.adjacency, eps, args.seed)?
        }
        Mechanism::LdpGcn => {
            let (g, eps) = need_graph()?;
            baseline_ldpgcn(&g.adjacency, eps, args.seed)?
        }
        Mechanism::Mlp | Mechanism::Gcn => {
            return Err(Error::invalid(format!("{mechanism} does not reconstruct a graph")));
        }
    };
    save_estimate(&args.out, &estimate)?;
    print(json!({
        "mechanism": mechanism,
        "kind": estimate.kind(),
        "pairs": estimate.support_size(),
        "density": estimate.density(),
        "out": args.out,
    }));
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = args.model.apply(ModelConfig::default())?;
    let (graph, _) = load_cache(&args.graph)?;
    let prop = match (&args.estimate, args.mlp) {
        (Some(dir), _) => {
            let est = load_estimate(dir)?;
            if est.n() != graph.n() {
                return Err(Error::data(format!("estimate has {} nodes, graph has {}", est.n(), graph.n())));
            }
            Propagation::from_estimate(&est)
        }
        (None, true) => Propagation::identity(graph.n()),
        (None, false) => Propagation::from_adjacency(&graph.adjacency),
    };
    let features = Features::new(&graph.features, config.normalize_features);
    let split = split_nodes(graph.n(), args.split_seed)?;
    let model = train(&prop, &features, &graph.labels, graph.class_count, &split, &config)?;
    let test_accuracy = evaluate(&model, &prop, &features, &graph.labels, &split.test)?;
    std::fs::create_dir_all(&args.out)?;
    model.save(&args.out.join("model.json"))?;
    model.write_history(&args.out.join("history.csv"))?;
    print(json!({
        "test_accuracy": test_accuracy,
        "best_epoch": model.best_epoch,
        "best_val_accuracy": model.best_val_accuracy,
        "normalize_features": config.normalize_features,
        "out": args.out,
    }));
    Ok(())
}

fn sweep_config(args: &SweepArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &args.graph {
        config.dataset = DatasetSpec::Cache { dir: dir.clone() };
    }
    if let Some(m) = &args.mechanisms {
        config.mechanisms = m.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = &args.epsilons {
        config.epsilons = v.clone();
    }
    if let Some(v) = &args.deltas {
        config.deltas = v.clone();
    }
    if let Some(v) = args.trials {
        config.trials = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = &args.ablation {
        config.ablation = v.parse()?;
    }
    if args.train {
        config.train = true;
    }
    if args.no_train {
        config.train = false;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = &args.output_dir {
        config.output_dir = Some(v.clone());
    }
    config.model = args.model.apply(config.model.clone())?;
    config.validate()?;
    Ok(config)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = sweep_config(&args)?;
    let out = config
        .output_dir
        .clone()
        .ok_or_else(|| Error::invalid("no output directory; set output_dir or --output-dir"))?;
    let records = run_experiment(&config)?;
    let (runs, summary) = report(&records, &out, &json!({ "config": config }))?;
    print(json!({ "records": records.len(), "runs": runs, "summary": summary }));
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let records = read_runs(&args.runs)?;
    let (runs, summary) = report(&records, &args.out, &json!({ "source": args.runs }))?;
    print(json!({ "records": records.len(), "runs": runs, "summary": summary }));
    Ok(())
}

/// Runs the command line and returns the process exit code: 0 on success, 2 for
/// configuration errors, 3 for data errors and 4 for numeric failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Load(a) => cmd_load(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

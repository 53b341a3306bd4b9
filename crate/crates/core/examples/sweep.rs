//! A small experiment grid written to runs.csv and summary.json.
//!
//! cargo run --release --example sweep -- [OUT_DIR]

use std::path::PathBuf;

use blink::harness::{report, run_experiment, summarize, DatasetSpec, ExperimentConfig, Mechanism};
use blink::synthetic::BetaGraph;

fn main() -> blink::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("blink-sweep"));
    let config = ExperimentConfig {
        dataset: DatasetSpec::BetaModel {
            params: BetaGraph::default(),
            seed: 3,
        },
        mechanisms: vec![Mechanism::BlinkSoft, Mechanism::BlinkHard, Mechanism::Rr, Mechanism::Dprr],
        epsilons: vec![1.0, 2.0, 4.0, 8.0],
        deltas: vec![0.1],
        trials: 3,
        ..Default::default()
    };
    let records = run_experiment(&config)?;
    for s in summarize(&records) {
        if let Some(m) = s.mae {
            println!("{:<11} eps={} mae {:.5} +/- {:.5}", s.mechanism, s.epsilon, m.mean, m.std);
        }
    }
    let (runs, summary) = report(&records, &out, &config)?;
    println!("wrote {} and {}", runs.display(), summary.display());
    Ok(())
}

//! Full pipeline against its prior-only and evidence-only halves across budgets.

use blink::denoiser::{posterior, Ablation, MleOptions};
use blink::harness::mae;
use blink::randomizer::{perturb_graph, PrivacyBudget};
use blink::synthetic::{beta_graph, BetaGraph};

fn main() -> blink::Result<()> {
    let (graph, _) = beta_graph(&BetaGraph::default(), 11)?;
    let trials = 3;
    println!("{:>4} {:>10} {:>10} {:>10}", "eps", "full", "prior", "evidence");
    for eps in 1..=8 {
        let mut row = [0.0; 3];
        for t in 0..trials {
            let batch = perturb_graph(&graph.adjacency, &PrivacyBudget::new(f64::from(eps), 0.2)?, t);
            for (k, ablation) in [Ablation::Full, Ablation::PriorOnly, Ablation::EvidenceOnly].into_iter().enumerate() {
                let p = posterior(&batch, &MleOptions::default(), ablation)?;
                row[k] += mae(&p, &graph.adjacency)?.mae / trials as f64;
            }
        }
        println!("{eps:>4} {:>10.5} {:>10.5} {:>10.5}", row[0], row[1], row[2]);
    }
    Ok(())
}

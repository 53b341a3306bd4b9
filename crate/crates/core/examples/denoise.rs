//! Fits the degree prior from noisy degrees and combines it with the noisy bits.
//!
//! On a graph drawn from the beta model the fitted prior should track the true link
//! probabilities, and the posterior should sit closer to the truth than either input.

use blink::denoiser::{mle_link_probability, posterior, Ablation, MleOptions};
use blink::graph::degree_sequence;
use blink::harness::mae;
use blink::numeric::logistic;
use blink::randomizer::{perturb_graph, PrivacyBudget};
use blink::synthetic::{beta_graph, BetaGraph};

fn main() -> blink::Result<()> {
    let (graph, beta) = beta_graph(&BetaGraph::default(), 7)?;
    let n = graph.n();

    let fit = mle_link_probability(&degree_sequence(&graph.adjacency), &MleOptions::default())?;
    let mut gap = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            gap += (fit.prior_prob(i, j) - logistic(beta[i] + beta[j])).abs();
        }
    }
    println!(
        "noise-free fit: {} iterations, mean |p_hat - p| = {:.4}",
        fit.iterations,
        gap / (n * (n - 1) / 2) as f64
    );

    let budget = PrivacyBudget::new(4.0, 0.3)?;
    let batch = perturb_graph(&graph.adjacency, &budget, 1);
    for ablation in [Ablation::Full, Ablation::PriorOnly, Ablation::EvidenceOnly] {
        let p = posterior(&batch, &MleOptions::default(), ablation)?;
        let err = mae(&p, &graph.adjacency)?;
        println!("{ablation:?}: l1 error {:.1}, mae {:.5}", err.l1_error, err.mae);
    }
    Ok(())
}

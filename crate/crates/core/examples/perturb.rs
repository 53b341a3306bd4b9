//! Runs the node-side randomizer and checks the released bits against the flip rate.

use blink::randomizer::{flip_probability, perturb_graph, PrivacyBudget};
use blink::synthetic::cora_like;

fn main() -> blink::Result<()> {
    let graph = cora_like(0);
    let n = graph.n();
    for eps in [1.0, 4.0, 8.0] {
        let budget = PrivacyBudget::new(eps, 0.1)?;
        let batch = perturb_graph(&graph.adjacency, &budget, 42);
        let noisy = batch.noisy_matrix()?;
        let mut flipped = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i != j && noisy.get(i, j) != graph.adjacency.has_edge(i, j) {
                    flipped += 1;
                }
            }
        }
        let degrees = batch.noisy_degrees().expect("delta > 0 releases degrees");
        let degree_error: f64 = degrees
            .values()
            .iter()
            .zip(graph.degree_sequence().values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n as f64;
        println!(
            "eps={eps}: flip prob {:.4}, observed {:.4}, mean |degree noise| {:.2} (expected {:.2})",
            flip_probability(&budget),
            flipped as f64 / (n * (n - 1)) as f64,
            degree_error,
            1.0 / budget.epsilon_degree()
        );
    }
    Ok(())
}

//! Turns one posterior into the hard, soft and hybrid graph estimates.

use blink::denoiser::{posterior, Ablation, MleOptions};
use blink::harness::mae;
use blink::randomizer::{perturb_graph, PrivacyBudget};
use blink::reconstruct::{blink_hard, blink_hybrid, blink_soft};
use blink::synthetic::cora_like;

fn main() -> blink::Result<()> {
    let graph = cora_like(0);
    println!("true density {:.5}", graph.adjacency.density());
    for eps in [2.0, 8.0] {
        let batch = perturb_graph(&graph.adjacency, &PrivacyBudget::new(eps, 0.1)?, 5);
        let p = posterior(&batch, &MleOptions::default(), Ablation::Full)?;
        for est in [blink_hard(&p), blink_soft(&p), blink_hybrid(&p)] {
            let err = mae(&est, &graph.adjacency)?;
            println!(
                "eps={eps} {:<13} density {:.5}  pairs {:>8}  l1 error {:>9.1}",
                est.provenance.mechanism,
                est.density(),
                est.support_size(),
                err.l1_error
            );
        }
    }
    Ok(())
}

//! The four comparison mechanisms next to the hard Blink estimate at one budget.

use blink::denoiser::{posterior, Ablation, MleOptions};
use blink::harness::mae;
use blink::randomizer::{perturb_graph, PrivacyBudget};
use blink::reconstruct::{baseline_dprr, baseline_ldpgcn, baseline_rr, baseline_symrr, blink_hard};
use blink::synthetic::cora_like;

fn main() -> blink::Result<()> {
    let graph = cora_like(0);
    let truth = &graph.adjacency;
    let eps = 4.0;

    let full = perturb_graph(truth, &PrivacyBudget::new(eps, 0.0)?, 1);
    let split = perturb_graph(truth, &PrivacyBudget::new(eps, 0.1)?, 2);
    let estimates = [
        blink_hard(&posterior(&split, &MleOptions::default(), Ablation::Full)?),
        baseline_rr(&full)?,
        baseline_symrr(truth, eps, 3)?,
        baseline_ldpgcn(truth, eps, 4)?,
        baseline_dprr(&split, 5)?,
    ];
    println!("eps={eps}, true edges {}", truth.edge_count());
    for est in &estimates {
        let err = mae(est, truth)?;
        println!(
            "{:<11} pairs {:>8}  density {:.5}  l1 error {:>10.1}",
            est.provenance.mechanism,
            est.support_size(),
            est.density(),
            err.l1_error
        );
    }
    Ok(())
}

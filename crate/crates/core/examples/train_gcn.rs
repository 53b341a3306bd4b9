//! Trains an MLP, a GCN on the true graph and a GCN on a private estimate.

use blink::denoiser::{posterior, Ablation, MleOptions};
use blink::gnn::{evaluate, train, Features, ModelConfig, Propagation};
use blink::graph::split_nodes;
use blink::randomizer::{perturb_graph, PrivacyBudget};
use blink::reconstruct::blink_soft;
use blink::synthetic::cora_like;

fn main() -> blink::Result<()> {
    let graph = cora_like(0);
    let features = Features::new(&graph.features, true);
    let split = split_nodes(graph.n(), 0)?;
    let config = ModelConfig::default();

    let batch = perturb_graph(&graph.adjacency, &PrivacyBudget::new(4.0, 0.1)?, 9);
    let estimate = blink_soft(&posterior(&batch, &MleOptions::default(), Ablation::Full)?);

    let arms = [
        ("mlp", Propagation::identity(graph.n())),
        ("gcn", Propagation::from_adjacency(&graph.adjacency)),
        ("blink_soft eps=4", Propagation::from_estimate(&estimate)),
    ];
    for (name, prop) in &arms {
        let model = train(prop, &features, &graph.labels, graph.class_count, &split, &config)?;
        let acc = evaluate(&model, prop, &features, &graph.labels, &split.test)?;
        println!(
            "{name:<17} test acc {acc:.3}  (best epoch {}, val {:.3})",
            model.best_epoch, model.best_val_accuracy
        );
    }
    Ok(())
}

//! Loads a content/cites dataset (or the Cora-shaped stand-in) and writes a graph cache.
//!
//! cargo run --release --example load_dataset -- [DIR_WITH_cora.content] [OUT_DIR]

use std::path::PathBuf;

use blink::dataset::{find_content_pair, load_cache, load_content_format, save_cache};
use blink::synthetic::cora_like;

fn main() -> blink::Result<()> {
    let mut args = std::env::args().skip(1);
    let source = args.next().map(PathBuf::from);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("blink-graph"));

    let (graph, ids, classes) = match source.as_deref().and_then(|d| find_content_pair(d, "cora")) {
        Some((content, cites)) => {
            let ds = load_content_format(&content, &cites)?;
            println!(
                "read {} citations: {} unknown ids, {} self-citations, {} duplicates",
                ds.stats.citation_rows, ds.stats.unknown_ids, ds.stats.self_citations, ds.stats.duplicate_pairs
            );
            (ds.graph, ds.node_ids, ds.class_names)
        }
        None => {
            println!("no dataset given, using the synthetic stand-in");
            (cora_like(0), Vec::new(), Vec::new())
        }
    };
    save_cache(&out, &graph, &ids, &classes)?;
    let (cached, manifest) = load_cache(&out)?;
    assert_eq!(cached.adjacency, graph.adjacency);
    println!(
        "{} nodes, {} edges, {} features, {} classes, density {:.5}",
        manifest.n,
        cached.adjacency.edge_count(),
        cached.feature_dim(),
        cached.class_count,
        cached.adjacency.density()
    );
    println!("cache written to {}", out.display());
    Ok(())
}

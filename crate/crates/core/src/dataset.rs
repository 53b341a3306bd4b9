//! Citation-network ingestion and the binary graph cache.
//!
//! Content files hold one node per line, `<id> <feature>... <label>`; cites files hold
//! one citation per line, `<target> <source>`. Both are whitespace separated.
//!
//! The cache is a directory holding `manifest.json`, `adjacency.bin` (row-major bitset,
//! LSB-first within bytes) and `features.bin` (row-major little-endian `f64`).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bitmatrix::BitMatrix;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, Graph};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: Graph,
    pub node_ids: Vec<String>,
    pub class_names: Vec<String>,
    pub stats: LoadStats,
}

/// What happened to the citation rows while building the simple graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub citation_rows: usize,
    pub unknown_ids: usize,
    pub self_citations: usize,
    pub duplicate_pairs: usize,
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::from(e).context(format!("opening {}", path.display())))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads a content/cites pair. Labels get dense ids in order of first appearance and
/// every citation becomes one undirected edge.
pub fn load_content_format(content_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let mut node_ids = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut features: Vec<f64> = Vec::new();
    let mut feature_dim: Option<usize> = None;

    for (lineno, line) in open(content_path)?.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 2 {
            return Err(parse_error(content_path, lineno, "expected `<id> <features...> <label>`"));
        }
        let id = tokens[0];
        let label = tokens[tokens.len() - 1];
        let row = &tokens[1..tokens.len() - 1];
        match feature_dim {
            None => feature_dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(parse_error(
                    content_path,
                    lineno,
                    format!("expected {d} features, found {}", row.len()),
                ))
            }
            Some(_) => {}
        }
        for tok in row {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_error(content_path, lineno, format!("invalid feature value `{tok}`")))?;
            features.push(v);
        }
        if index.insert(id.to_string(), node_ids.len()).is_some() {
            return Err(Error::DuplicateNode {
                path: content_path.to_path_buf(),
                line: lineno,
                id: id.to_string(),
            });
        }
        node_ids.push(id.to_string());
        let next = class_names.len();
        let class = *class_index.entry(label.to_string()).or_insert_with(|| {
            class_names.push(label.to_string());
            next
        });
        labels.push(class);
    }

    let n = node_ids.len();
    let d = feature_dim.unwrap_or(0);
    let mut adjacency = Adjacency::empty(n);
    let mut stats = LoadStats::default();
    for (lineno, line) in open(cites_path)?.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(parse_error(cites_path, lineno, "expected `<target> <source>`"));
        }
        stats.citation_rows += 1;
        let (Some(&a), Some(&b)) = (index.get(tokens[0]), index.get(tokens[1])) else {
            stats.unknown_ids += 1;
            continue;
        };
        if a == b {
            stats.self_citations += 1;
        } else if !adjacency.add_edge(a, b) {
            stats.duplicate_pairs += 1;
        }
    }

    let features = Array2::from_shape_vec((n, d), features)
        .map_err(|e| Error::data(format!("feature matrix shape: {e}")))?;
    let class_count = class_names.len();
    let graph = Graph::new(adjacency, features, labels, class_count)?;
    Ok(Dataset {
        graph,
        node_ids,
        class_names,
        stats,
    })
}

pub const GRAPH_FORMAT: &str = "blink-graph-v1";
const ADJACENCY_FILE: &str = "adjacency.bin";
const FEATURES_FILE: &str = "features.bin";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphManifest {
    pub format: String,
    pub n: usize,
    pub feature_dim: usize,
    pub class_count: usize,
    pub edge_count: usize,
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub node_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_names: Vec<String>,
    pub adjacency_file: String,
    pub features_file: String,
}

pub fn write_f64s(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    if bytes.len() != expected * 8 {
        return Err(Error::data(format!(
            "{}: expected {expected} f64 values, found {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes the graph cache into `dir`, creating it if needed.
pub fn save_cache(dir: &Path, graph: &Graph, node_ids: &[String], class_names: &[String]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(ADJACENCY_FILE), graph.adjacency.bits().to_bytes())?;
    write_f64s(&dir.join(FEATURES_FILE), graph.features.iter().copied())?;
    let manifest = GraphManifest {
        format: GRAPH_FORMAT.to_string(),
        n: graph.n(),
        feature_dim: graph.feature_dim(),
        class_count: graph.class_count,
        edge_count: graph.adjacency.edge_count(),
        labels: graph.labels.clone(),
        node_ids: node_ids.to_vec(),
        class_names: class_names.to_vec(),
        adjacency_file: ADJACENCY_FILE.to_string(),
        features_file: FEATURES_FILE.to_string(),
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_cache(dir: &Path) -> Result<(Graph, GraphManifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw = fs::read(&manifest_path)
        .map_err(|e| Error::from(e).context(format!("reading {}", manifest_path.display())))?;
    let manifest: GraphManifest = serde_json::from_slice(&raw)?;
    if manifest.format != GRAPH_FORMAT {
        return Err(Error::data(format!("unsupported graph format `{}`", manifest.format)));
    }
    let bits = BitMatrix::from_bytes(manifest.n, &fs::read(dir.join(&manifest.adjacency_file))?)?;
    let adjacency = Adjacency::from_bit_matrix(bits)?;
    if adjacency.edge_count() != manifest.edge_count {
        return Err(Error::data(format!(
            "manifest lists {} edges but the bitset holds {}",
            manifest.edge_count,
            adjacency.edge_count()
        )));
    }
    let values = read_f64s(&dir.join(&manifest.features_file), manifest.n * manifest.feature_dim)?;
    let features = Array2::from_shape_vec((manifest.n, manifest.feature_dim), values)
        .map_err(|e| Error::data(format!("feature matrix shape: {e}")))?;
    let graph = Graph::new(adjacency, features, manifest.labels.clone(), manifest.class_count)?;
    Ok((graph, manifest))
}

/// Looks for `<dir>/<name>.content` and `<dir>/<name>.cites`.
pub fn find_content_pair(dir: &Path, name: &str) -> Option<(PathBuf, PathBuf)> {
    let content = dir.join(format!("{name}.content"));
    let cites = dir.join(format!("{name}.cites"));
    (content.is_file() && cites.is_file()).then_some((content, cites))
}

//! Reader and writer for the plain-text graph-classification dataset layout
//! used by the public benchmark archives: `<name>_A.txt` edge list (1-indexed,
//! comma separated, both directions may appear), `<name>_graph_indicator.txt`
//! mapping each node line to its graph, `<name>_graph_labels.txt`, and an
//! optional `<name>_node_labels.txt`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graph::{degree_one_hot, one_hot_features, Dataset, Graph, GraphError};
use crate::scalar::Scalar;

/// Cap for the degree one-hot fallback when a dataset ships no node labels.
pub const DEFAULT_MAX_DEGREE: usize = 10;

#[derive(Debug, Error)]
pub enum TuError {
    #[error("missing mandatory file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{file}: expected {expected} lines, found {found}")]
    LengthMismatch {
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn read_lines(path: &Path) -> Result<Vec<String>, TuError> {
    if !path.exists() {
        return Err(TuError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| TuError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_int(path: &Path, line_no: usize, token: &str) -> Result<i64, TuError> {
    token.trim().parse::<i64>().map_err(|_| TuError::Parse {
        file: path.to_path_buf(),
        line: line_no,
        message: format!("expected an integer, found {token:?}"),
    })
}

/// Loads `<name>` from `dir`, remapping node ids to 0-based per-graph ids and
/// raw graph labels to contiguous 0-based classes. Node labels become one-hot
/// features when present; otherwise features are a degree one-hot capped at
/// `max_degree`.
pub fn load_tu_dataset_with<S: Scalar>(
    dir: &Path,
    name: &str,
    max_degree: usize,
) -> Result<Dataset<S>, TuError> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator_lines = read_lines(&indicator_path)?;
    let num_nodes = indicator_lines.len();
    let mut graph_of_node = Vec::with_capacity(num_nodes);
    for (i, l) in indicator_lines.iter().enumerate() {
        let gid = parse_int(&indicator_path, i + 1, l)?;
        if gid < 1 {
            return Err(TuError::Parse {
                file: indicator_path.clone(),
                line: i + 1,
                message: format!("graph id {gid} must be positive"),
            });
        }
        graph_of_node.push((gid - 1) as usize);
    }
    let num_graphs = graph_of_node.iter().map(|&g| g + 1).max().unwrap_or(0);

    let labels_path = file("graph_labels");
    let label_lines = read_lines(&labels_path)?;
    if label_lines.len() != num_graphs {
        return Err(TuError::LengthMismatch {
            file: labels_path.clone(),
            expected: num_graphs,
            found: label_lines.len(),
        });
    }
    let raw_labels: Vec<i64> = label_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(&labels_path, i + 1, l))
        .collect::<Result<_, _>>()?;
    let mut classes: Vec<i64> = raw_labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let class_of = |raw: i64| classes.binary_search(&raw).expect("raw label seen above");

    // Local node ids: rank of the node within its graph, in global order.
    let mut local_id = Vec::with_capacity(num_nodes);
    let mut node_counts = vec![0usize; num_graphs];
    for &g in &graph_of_node {
        local_id.push(node_counts[g]);
        node_counts[g] += 1;
    }

    let edges_path = file("A");
    let edge_lines = read_lines(&edges_path)?;
    let mut per_graph_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (i, l) in edge_lines.iter().enumerate() {
        let line_no = i + 1;
        let mut parts = l.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(TuError::Parse {
                    file: edges_path.clone(),
                    line: line_no,
                    message: format!("expected `u, v`, found {l:?}"),
                })
            }
        };
        let u = parse_int(&edges_path, line_no, a)?;
        let v = parse_int(&edges_path, line_no, b)?;
        for id in [u, v] {
            if id < 1 || id as usize > num_nodes {
                return Err(TuError::Parse {
                    file: edges_path.clone(),
                    line: line_no,
                    message: format!("edge references unknown node {id} (have {num_nodes})"),
                });
            }
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        if graph_of_node[u] != graph_of_node[v] {
            return Err(TuError::Parse {
                file: edges_path.clone(),
                line: line_no,
                message: format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    u + 1,
                    v + 1,
                    graph_of_node[u] + 1,
                    graph_of_node[v] + 1
                ),
            });
        }
        per_graph_edges[graph_of_node[u]].push((local_id[u], local_id[v]));
    }

    // Optional categorical node labels.
    let node_labels_path = file("node_labels");
    let node_categories: Option<Vec<usize>> = if node_labels_path.exists() {
        let lines = read_lines(&node_labels_path)?;
        if lines.len() != num_nodes {
            return Err(TuError::LengthMismatch {
                file: node_labels_path.clone(),
                expected: num_nodes,
                found: lines.len(),
            });
        }
        let raw: Vec<i64> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| parse_int(&node_labels_path, i + 1, l))
            .collect::<Result<_, _>>()?;
        let mut cats: Vec<i64> = raw.clone();
        cats.sort_unstable();
        cats.dedup();
        Some(
            raw.iter()
                .map(|r| cats.binary_search(r).expect("category seen above"))
                .collect(),
        )
    } else {
        None
    };
    let num_categories = node_categories
        .as_ref()
        .map(|c| c.iter().max().map_or(0, |&m| m + 1));

    let mut graphs = Vec::with_capacity(num_graphs);
    let mut node_cursor = 0usize;
    for g in 0..num_graphs {
        let n = node_counts[g];
        let graph = Graph::from_edges(n, per_graph_edges[g].iter().copied())?
            .with_label(class_of(raw_labels[g]));
        let graph = match (&node_categories, num_categories) {
            (Some(cats), Some(dim)) => {
                let assignments: Vec<usize> = cats[node_cursor..node_cursor + n].to_vec();
                graph.with_features(one_hot_features(&assignments, dim))?
            }
            _ => degree_one_hot(&graph, max_degree),
        };
        node_cursor += n;
        graphs.push(graph);
    }

    Ok(Dataset::new(name, graphs, classes.len())?)
}

pub fn load_tu_dataset<S: Scalar>(dir: &Path, name: &str) -> Result<Dataset<S>, TuError> {
    load_tu_dataset_with(dir, name, DEFAULT_MAX_DEGREE)
}

/// Writes a dataset back out in the same layout (edges in both directions,
/// 1-indexed ids, labels already contiguous). Node labels are not emitted;
/// reloading falls back to degree features.
pub fn save_tu_dataset<S: Scalar>(dataset: &Dataset<S>, dir: &Path) -> Result<(), TuError> {
    let io_err = |path: &Path, source: std::io::Error| TuError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let file = |suffix: &str| dir.join(format!("{}_{suffix}.txt", dataset.name));

    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut offset = 0usize;
    for (g, graph) in dataset.graphs.iter().enumerate() {
        for &(u, v) in graph.edges() {
            let (u1, v1) = (offset + u + 1, offset + v + 1);
            a.push_str(&format!("{u1}, {v1}\n{v1}, {u1}\n"));
        }
        for _ in 0..graph.num_nodes() {
            indicator.push_str(&format!("{}\n", g + 1));
        }
        labels.push_str(&format!("{}\n", graph.label().unwrap_or(0)));
        offset += graph.num_nodes();
    }
    for (suffix, content) in [
        ("A", a),
        ("graph_indicator", indicator),
        ("graph_labels", labels),
    ] {
        let path = file(suffix);
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(content.as_bytes())
            .map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_toy(dir: &Path) {
        // Two triangles over six global nodes.
        fs::write(
            dir.join("toy_A.txt"),
            "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n5, 6\n6, 5\n4, 6\n6, 4\n",
        )
        .unwrap();
        fs::write(dir.join("toy_graph_indicator.txt"), "1\n1\n1\n2\n2\n2\n").unwrap();
        fs::write(dir.join("toy_graph_labels.txt"), "-1\n1\n").unwrap();
    }

    #[test]
    fn toy_round_trip_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        let d: Dataset<f64> = load_tu_dataset(dir.path(), "toy").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.num_classes, 2);
        for g in &d.graphs {
            assert_eq!(g.num_nodes(), 3);
            assert_eq!(g.num_edges(), 3);
        }
        // Raw labels -1/1 remap to 0/1 in sorted order.
        assert_eq!(d.graphs[0].label(), Some(0));
        assert_eq!(d.graphs[1].label(), Some(1));
    }

    #[test]
    fn node_labels_become_one_hot_features() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        fs::write(dir.path().join("toy_node_labels.txt"), "0\n2\n0\n2\n2\n0\n").unwrap();
        let d: Dataset<f64> = load_tu_dataset(dir.path(), "toy").unwrap();
        assert_eq!(d.feature_dim, 2); // categories {0, 2} collapse to two slots
        assert_eq!(d.graphs[0].features().get(0, 0), 1.0);
        assert_eq!(d.graphs[0].features().get(1, 1), 1.0);
    }

    #[test]
    fn missing_file_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_tu_dataset::<f64>(dir.path(), "toy").unwrap_err();
        assert!(matches!(err, TuError::MissingFile(_)), "{err}");
    }

    #[test]
    fn unknown_edge_endpoint_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        fs::write(dir.path().join("toy_A.txt"), "1, 2\n2, 99\n").unwrap();
        let err = load_tu_dataset::<f64>(dir.path(), "toy").unwrap_err();
        match err {
            TuError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown node 99"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn label_length_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        fs::write(dir.path().join("toy_graph_labels.txt"), "0\n1\n1\n").unwrap();
        let err = load_tu_dataset::<f64>(dir.path(), "toy").unwrap_err();
        assert!(matches!(err, TuError::LengthMismatch { .. }), "{err}");
    }

    #[test]
    fn save_then_load_preserves_adjacency_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        let d: Dataset<f64> = load_tu_dataset(dir.path(), "toy").unwrap();

        let out = tempfile::tempdir().unwrap();
        save_tu_dataset(&d, out.path()).unwrap();
        let d2: Dataset<f64> = load_tu_dataset(out.path(), "toy").unwrap();

        assert_eq!(d.len(), d2.len());
        for (a, b) in d.graphs.iter().zip(&d2.graphs) {
            assert_eq!(a.edges(), b.edges());
            assert_eq!(a.label(), b.label());
        }
    }
}

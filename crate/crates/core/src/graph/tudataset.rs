//! Flat-file graph dataset ingestion and serialization.
//!
//! Layout inside a directory, for a dataset called `NAME`:
//! - `NAME_A.txt` — edge list, one `i, j` pair per line (1-based *global*
//!   node ids; each undirected edge appears as two directed lines),
//! - `NAME_graph_indicator.txt` — one 1-based graph id per node line,
//! - `NAME_graph_labels.txt` — one integer per graph line,
//! - `NAME_node_attributes.txt` (optional) — comma-separated decimal reals,
//!   one node per line,
//! - `NAME_node_labels.txt` (optional) — one integer per node line.
//!
//! Node attributes become feature columns; integer node labels become a
//! one-hot block appended after the attribute columns. Graph labels are
//! remapped to contiguous `0..C-1` by ascending original value and one-hot
//! encoded.
//!
//! [`save_tudataset`] writes the same layout. The full feature matrix is
//! emitted as `NAME_node_attributes.txt` (a loaded one-hot node-label block
//! reloads as plain attributes with identical values), graph labels are
//! written as the contiguous `0..C-1` class ids, and every class must occur
//! in the dataset for a reload to reproduce the class count.

use std::collections::BTreeMap;
use std::path::Path;

use crate::Matrix;

use super::{one_hot, Graph, GraphDataset, GraphError};

fn read_lines(path: &Path) -> Result<Vec<String>, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn parse_int(file: &str, line: usize, token: &str) -> Result<i64, GraphError> {
    token.trim().parse::<i64>().map_err(|_| GraphError::Parse {
        file: file.to_string(),
        line,
        msg: format!("expected an integer, got `{token}`"),
    })
}

fn parse_real(file: &str, line: usize, token: &str) -> Result<f64, GraphError> {
    token.trim().parse::<f64>().map_err(|_| GraphError::Parse {
        file: file.to_string(),
        line,
        msg: format!("expected a real number, got `{token}`"),
    })
}

/// Loads the dataset `name` from `dir`. See the module docs for the layout.
pub fn load_tudataset(dir: &Path, name: &str) -> Result<GraphDataset, GraphError> {
    let file_name = |suffix: &str| format!("{name}_{suffix}.txt");
    let mandatory = |suffix: &str| -> Result<Vec<String>, GraphError> {
        let path = dir.join(file_name(suffix));
        if !path.is_file() {
            return Err(GraphError::MissingFile { path });
        }
        read_lines(&path)
    };
    let optional = |suffix: &str| -> Result<Option<Vec<String>>, GraphError> {
        let path = dir.join(file_name(suffix));
        if !path.is_file() {
            return Ok(None);
        }
        read_lines(&path).map(Some)
    };

    // Graph labels: one integer per graph, remapped by ascending value.
    let labels_file = file_name("graph_labels");
    let label_lines = mandatory("graph_labels")?;
    let num_graphs = label_lines.len();
    let mut raw_labels = Vec::with_capacity(num_graphs);
    for (idx, line) in label_lines.iter().enumerate() {
        raw_labels.push(parse_int(&labels_file, idx + 1, line)?);
    }
    let mut class_of: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in &raw_labels {
        class_of.entry(l).or_default();
    }
    for (next, (_, v)) in class_of.iter_mut().enumerate() {
        *v = next;
    }
    let num_classes = class_of.len();

    // Indicator: graph membership and local index of each global node.
    let indicator_file = file_name("graph_indicator");
    let indicator_lines = mandatory("graph_indicator")?;
    let num_nodes = indicator_lines.len();
    let mut graph_of = Vec::with_capacity(num_nodes);
    let mut local_of = Vec::with_capacity(num_nodes);
    let mut sizes = vec![0usize; num_graphs];
    for (idx, line) in indicator_lines.iter().enumerate() {
        let id = parse_int(&indicator_file, idx + 1, line)?;
        if id < 1 || id as usize > num_graphs {
            return Err(GraphError::GraphIdOutOfRange {
                file: indicator_file,
                line: idx + 1,
                id,
                max: num_graphs,
            });
        }
        let g = id as usize - 1;
        graph_of.push(g);
        local_of.push(sizes[g]);
        sizes[g] += 1;
    }
    for (g, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(GraphError::Parse {
                file: labels_file,
                line: g + 1,
                msg: format!("graph {} has no nodes in the indicator", g + 1),
            });
        }
    }

    // Edges.
    let a_file = file_name("A");
    let mut adjacency: Vec<Matrix> = sizes.iter().map(|&n| Matrix::zeros((n, n))).collect();
    for (idx, line) in mandatory("A")?.iter().enumerate() {
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() != 2 {
            return Err(GraphError::Parse {
                file: a_file,
                line: line_no,
                msg: format!("expected `i, j`, got `{line}`"),
            });
        }
        let mut endpoints = [0usize; 2];
        for (k, token) in tokens.iter().enumerate() {
            let v = parse_int(&a_file, line_no, token)?;
            if v < 1 || v as usize > num_nodes {
                return Err(GraphError::NodeIndexOutOfRange {
                    file: a_file,
                    line: line_no,
                    index: v,
                    max: num_nodes,
                });
            }
            endpoints[k] = v as usize - 1;
        }
        let [u, v] = endpoints;
        if u == v {
            return Err(GraphError::Parse {
                file: a_file,
                line: line_no,
                msg: format!("self-loop on node {}", u + 1),
            });
        }
        if graph_of[u] != graph_of[v] {
            return Err(GraphError::Parse {
                file: a_file,
                line: line_no,
                msg: format!(
                    "edge endpoints belong to graphs {} and {}",
                    graph_of[u] + 1,
                    graph_of[v] + 1
                ),
            });
        }
        let a = &mut adjacency[graph_of[u]];
        a[[local_of[u], local_of[v]]] = 1.0;
        a[[local_of[v], local_of[u]]] = 1.0;
    }

    // Optional node attributes.
    let attr_file = file_name("node_attributes");
    let mut attributes: Option<Vec<Vec<f64>>> = None;
    if let Some(lines) = optional("node_attributes")? {
        if lines.len() != num_nodes {
            return Err(GraphError::WrongLineCount {
                file: attr_file,
                expected: num_nodes,
                got: lines.len(),
            });
        }
        let mut rows = Vec::with_capacity(num_nodes);
        let mut width = 0usize;
        for (idx, line) in lines.iter().enumerate() {
            let mut row = Vec::new();
            for token in line.split(',') {
                row.push(parse_real(&attr_file, idx + 1, token)?);
            }
            if idx == 0 {
                width = row.len();
            } else if row.len() != width {
                return Err(GraphError::RaggedAttributes {
                    file: attr_file,
                    line: idx + 1,
                    expected: width,
                    got: row.len(),
                });
            }
            rows.push(row);
        }
        attributes = Some(rows);
    }

    // Optional integer node labels, one-hot by ascending value.
    let nl_file = file_name("node_labels");
    let mut node_label_onehot: Option<(Vec<usize>, usize)> = None;
    if let Some(lines) = optional("node_labels")? {
        if lines.len() != num_nodes {
            return Err(GraphError::WrongLineCount {
                file: nl_file,
                expected: num_nodes,
                got: lines.len(),
            });
        }
        let mut raw = Vec::with_capacity(num_nodes);
        for (idx, line) in lines.iter().enumerate() {
            raw.push(parse_int(&nl_file, idx + 1, line)?);
        }
        let mut slot_of: BTreeMap<i64, usize> = BTreeMap::new();
        for &l in &raw {
            slot_of.entry(l).or_default();
        }
        for (next, (_, v)) in slot_of.iter_mut().enumerate() {
            *v = next;
        }
        let width = slot_of.len();
        let slots = raw.iter().map(|l| slot_of[l]).collect();
        node_label_onehot = Some((slots, width));
    }

    let attr_width = attributes.as_ref().map_or(0, |rows| rows[0].len());
    let label_width = node_label_onehot.as_ref().map_or(0, |(_, w)| *w);
    let feature_dim = attr_width + label_width;

    let mut features: Vec<Matrix> = sizes
        .iter()
        .map(|&n| Matrix::zeros((n, feature_dim)))
        .collect();
    for node in 0..num_nodes {
        let (g, i) = (graph_of[node], local_of[node]);
        if let Some(rows) = &attributes {
            for (k, &v) in rows[node].iter().enumerate() {
                features[g][[i, k]] = v;
            }
        }
        if let Some((slots, _)) = &node_label_onehot {
            features[g][[i, attr_width + slots[node]]] = 1.0;
        }
    }

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, (a, f)) in adjacency.into_iter().zip(features).enumerate() {
        graphs.push(Graph::new(a, f, one_hot(class_of[&raw_labels[g]], num_classes))?);
    }
    GraphDataset::new(name, graphs)
}

fn write_file(dir: &Path, name: &str, lines: &[String]) -> Result<(), GraphError> {
    let path = dir.join(name);
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|source| GraphError::Io { path, source })
}

/// Serializes `ds` into `dir` under the dataset's own name. Requires 0/1
/// edge weights and one-hot graph labels (mixed graphs are not
/// representable in this format).
pub fn save_tudataset(ds: &GraphDataset, dir: &Path) -> Result<(), GraphError> {
    std::fs::create_dir_all(dir).map_err(|source| GraphError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut a_lines = Vec::new();
    let mut indicator = Vec::new();
    let mut labels = Vec::new();
    let mut attributes = Vec::new();
    let mut offset = 0usize; // global id of a graph's first node, 0-based

    for (index, g) in ds.graphs().iter().enumerate() {
        let n = g.n();
        let adj = g.adjacency();
        for i in 0..n {
            for j in 0..n {
                let w = adj[[i, j]];
                if w == 1.0 {
                    a_lines.push(format!("{}, {}", offset + i + 1, offset + j + 1));
                } else if w != 0.0 {
                    return Err(GraphError::NonBinaryAdjacency { index });
                }
            }
            indicator.push(format!("{}", index + 1));
            if ds.feature_dim() > 0 {
                let row: Vec<String> = g.features().row(i).iter().map(f64::to_string).collect();
                attributes.push(row.join(", "));
            }
        }
        let ones = g.label().iter().filter(|&&y| y == 1.0).count();
        let zeros = g.label().iter().filter(|&&y| y == 0.0).count();
        if ones != 1 || zeros != g.num_classes() - 1 {
            return Err(GraphError::SoftLabel { index });
        }
        labels.push(format!("{}", g.hard_label()));
        offset += n;
    }

    let name = ds.name();
    write_file(dir, &format!("{name}_A.txt"), &a_lines)?;
    write_file(dir, &format!("{name}_graph_indicator.txt"), &indicator)?;
    write_file(dir, &format!("{name}_graph_labels.txt"), &labels)?;
    if ds.feature_dim() > 0 {
        write_file(dir, &format!("{name}_node_attributes.txt"), &attributes)?;
    }
    Ok(())
}

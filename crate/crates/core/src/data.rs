//! On-disk dataset bundles.
//!
//! A bundle is a directory holding four files:
//!
//! - `manifest.json`: `{"name", "n", "m_pairs", "F", "C"}`.
//! - `edges.tsv`: a header line `i<TAB>j`, then one line per undirected pair
//!   with `i < j`, 0-indexed. Pairs are written in sorted order.
//! - `features.csv`: `n` lines of `F` comma-separated decimals, no header.
//! - `labels.txt`: `n` lines, one integer class index each.
//!
//! Floats are written in Rust's shortest round-trip form, so saving and
//! loading reproduces every value bit for bit. Edge counts in published
//! dataset tables are directed, i.e. twice the number of stored pairs.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::FeatureMatrix;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";
const EDGES_HEADER: &str = "i\tj";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub n: usize,
    pub m_pairs: usize,
    #[serde(rename = "F")]
    pub num_features: usize,
    #[serde(rename = "C")]
    pub num_classes: usize,
}

/// A labelled undirected graph with node features.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
}

impl DatasetBundle {
    pub fn new(name: impl Into<String>, graph: Graph, features: FeatureMatrix) -> Result<Self> {
        let bundle = DatasetBundle {
            name: name.into(),
            graph,
            features,
        };
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        if self.graph.is_directed() {
            return Err(Error::Validation("bundles hold undirected graphs only".into()));
        }
        if self.graph.labels().is_none() {
            return Err(Error::Validation("bundles must be labelled".into()));
        }
        if self.features.ncols() == 0 {
            return Err(Error::Validation("bundle has no feature columns".into()));
        }
        if self.features.nrows() != self.graph.num_nodes() {
            return Err(Error::Validation(format!(
                "{} feature rows for {} nodes",
                self.features.nrows(),
                self.graph.num_nodes()
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[usize] {
        self.graph.labels().expect("bundle graphs are labelled")
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            name: self.name.clone(),
            n: self.graph.num_nodes(),
            m_pairs: self.graph.num_edges(),
            num_features: self.features.ncols(),
            num_classes: self.graph.num_classes(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest =
        serde_json::from_str(&read(&manifest_path)?).map_err(|e| parse_err(&manifest_path, e.line(), e.to_string()))?;
    let n = manifest.n;

    let labels_path = dir.join(LABELS_FILE);
    let mut labels = Vec::with_capacity(n);
    for (line, text) in numbered_lines(&read(&labels_path)?) {
        let y: usize = text
            .trim()
            .parse()
            .map_err(|e| parse_err(&labels_path, line, format!("label {text:?}: {e}")))?;
        if y >= manifest.num_classes {
            return Err(parse_err(
                &labels_path,
                line,
                format!("label {y} not below C = {}", manifest.num_classes),
            ));
        }
        labels.push(y);
    }
    if labels.len() != n {
        return Err(Error::Validation(format!("{} labels, manifest says n = {n}", labels.len())));
    }

    let features_path = dir.join(FEATURES_FILE);
    let f = manifest.num_features;
    let mut values = Vec::with_capacity(n * f);
    let mut rows = 0;
    for (line, text) in numbered_lines(&read(&features_path)?) {
        let before = values.len();
        for cell in text.split(',') {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| parse_err(&features_path, line, format!("value {cell:?}: {e}")))?;
            values.push(v);
        }
        if values.len() - before != f {
            return Err(parse_err(
                &features_path,
                line,
                format!("{} columns, manifest says F = {f}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Validation(format!("{rows} feature rows, manifest says n = {n}")));
    }
    let features = Array2::from_shape_vec((n, f), values).expect("shape checked row by row");

    let edges_path = dir.join(EDGES_FILE);
    let edges_text = read(&edges_path)?;
    let mut lines = numbered_lines(&edges_text);
    match lines.next() {
        Some((_, header)) if header.trim() == EDGES_HEADER => {}
        Some((line, other)) => {
            return Err(parse_err(&edges_path, line, format!("expected header \"i\\tj\", found {other:?}")))
        }
        None => return Err(parse_err(&edges_path, 1, "missing header")),
    }
    let mut pairs = Vec::with_capacity(manifest.m_pairs);
    let mut seen = std::collections::HashSet::with_capacity(manifest.m_pairs);
    for (line, text) in lines {
        let mut cells = text.split('\t');
        let mut endpoint = || -> Result<usize> {
            let cell = cells.next().ok_or_else(|| parse_err(&edges_path, line, "expected two columns"))?;
            cell.trim()
                .parse()
                .map_err(|e| parse_err(&edges_path, line, format!("node {cell:?}: {e}")))
        };
        let (i, j) = (endpoint()?, endpoint()?);
        if cells.next().is_some() {
            return Err(parse_err(&edges_path, line, "expected two columns"));
        }
        if i == j {
            return Err(parse_err(&edges_path, line, format!("self edge at node {i}")));
        }
        if i >= n || j >= n {
            return Err(parse_err(&edges_path, line, format!("node out of range for n = {n}")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(parse_err(&edges_path, line, format!("duplicate edge ({i}, {j})")));
        }
        pairs.push((i, j));
    }
    if pairs.len() != manifest.m_pairs {
        return Err(Error::Validation(format!(
            "{} edge pairs, manifest says m_pairs = {}",
            pairs.len(),
            manifest.m_pairs
        )));
    }

    let graph = Graph::undirected(n, pairs, Some(labels), manifest.num_classes)?;
    DatasetBundle::new(manifest.name, graph, features)
}

pub fn save_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write;

    bundle.check()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))
    };

    write(MANIFEST_FILE, serde_json::to_string_pretty(&bundle.manifest())? + "\n")?;

    let mut edges = String::from(EDGES_HEADER);
    edges.push('\n');
    for &(i, j) in bundle.graph.edges() {
        writeln!(edges, "{i}\t{j}").expect("writing to a String");
    }
    write(EDGES_FILE, edges)?;

    let mut features = String::new();
    for row in bundle.features.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                features.push(',');
            }
            write!(features, "{v}").expect("writing to a String");
        }
        features.push('\n');
    }
    write(FEATURES_FILE, features)?;

    let mut labels = String::new();
    for y in bundle.labels() {
        writeln!(labels, "{y}").expect("writing to a String");
    }
    write(LABELS_FILE, labels)
}

/// Published statistics of one benchmark dataset. `edges` is the directed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Table1Row {
    pub name: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    pub classes: usize,
}

pub const BENCHMARKS: [Table1Row; 6] = [
    Table1Row { name: "cora", nodes: 2708, edges: 10558, features: 1433, classes: 7 },
    Table1Row { name: "citeseer", nodes: 3327, edges: 9104, features: 3703, classes: 6 },
    Table1Row { name: "pubmed", nodes: 19717, edges: 88648, features: 500, classes: 3 },
    Table1Row { name: "actor", nodes: 7600, edges: 25944, features: 931, classes: 5 },
    Table1Row { name: "chameleon", nodes: 2277, edges: 33824, features: 2325, classes: 5 },
    Table1Row { name: "squirrel", nodes: 5201, edges: 211872, features: 2089, classes: 5 },
];

/// Looks up a benchmark row by case-insensitive name.
pub fn benchmark(name: &str) -> Option<Table1Row> {
    BENCHMARKS.iter().copied().find(|r| r.name.eq_ignore_ascii_case(name))
}

/// Relative tolerance on the directed edge count.
pub const EDGE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatCheck {
    pub field: &'static str,
    pub expected: usize,
    pub observed: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub dataset: String,
    pub checks: Vec<StatCheck>,
}

impl StatsReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Compares a bundle against published statistics. Node, feature and class
/// counts must match exactly; the directed edge count `2·m_pairs` may drift
/// by [`EDGE_TOLERANCE`].
pub fn validate_stats(bundle: &DatasetBundle, expected: &Table1Row) -> StatsReport {
    let exact = |field, expected: usize, observed: usize| StatCheck {
        field,
        expected,
        observed,
        pass: expected == observed,
    };
    let directed = 2 * bundle.graph.num_edges();
    let drift = (directed as f64 - expected.edges as f64).abs();
    StatsReport {
        dataset: expected.name.to_string(),
        checks: vec![
            exact("nodes", expected.nodes, bundle.graph.num_nodes()),
            StatCheck {
                field: "edges",
                expected: expected.edges,
                observed: directed,
                pass: drift <= EDGE_TOLERANCE * expected.edges as f64,
            },
            exact("features", expected.features, bundle.features.ncols()),
            exact("classes", expected.classes, bundle.graph.num_classes()),
        ],
    }
}

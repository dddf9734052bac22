//! Graph structure and homophily ratios.
//!
//! A [`Graph`] is either undirected (each pair stored once, both endpoints
//! see each other as neighbours) or a directed neighbour-list graph as
//! produced by the synthetic generator. Degrees are always the length of a
//! node's neighbour list, self-loops excluded.

mod operator;

use std::collections::HashSet;

pub use operator::{build_propagation_matrix, Mode, PropagationMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    /// Stored edges: `(i, j)` with `i < j` for undirected graphs, arcs
    /// `i -> j` for directed ones. Sorted.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl Graph {
    /// Builds an undirected graph from unordered pairs.
    ///
    /// Pairs may be given in either orientation; they are normalised to
    /// `i < j` and sorted, so the result does not depend on input order.
    pub fn undirected(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-pair ({a}, {b})")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::Validation(format!(
                    "duplicate pair ({}, {})",
                    key.0, key.1
                )));
            }
            edges.push(key);
        }
        edges.sort_unstable();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self::finish(n, false, edges, neighbors, labels, num_classes)
    }

    /// Builds a directed graph from per-node out-neighbour lists.
    pub fn directed(
        neighbors: Vec<Vec<usize>>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = neighbors.len();
        let mut edges = Vec::new();
        for (i, list) in neighbors.iter().enumerate() {
            let mut seen = HashSet::with_capacity(list.len());
            for &j in list {
                if j >= n {
                    return Err(Error::Validation(format!("arc {i}->{j} out of range")));
                }
                if j == i {
                    return Err(Error::Validation(format!("self-arc at node {i}")));
                }
                if !seen.insert(j) {
                    return Err(Error::Validation(format!("duplicate arc {i}->{j}")));
                }
                edges.push((i, j));
            }
        }
        edges.sort_unstable();
        Self::finish(n, true, edges, neighbors, labels, num_classes)
    }

    fn finish(
        n: usize,
        directed: bool,
        edges: Vec<(usize, usize)>,
        neighbors: Vec<Vec<usize>>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} nodes",
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
                return Err(Error::Validation(format!(
                    "label {bad} not below class count {num_classes}"
                )));
            }
        }
        Ok(Graph {
            n,
            directed,
            edges,
            neighbors,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Stored edges (pairs or arcs), sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub(crate) fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::domain("graph has no labels"))
    }

    /// Undirected graph with the union of both arc directions.
    pub fn symmetrized(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        let pairs: HashSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect();
        Graph::undirected(self.n, pairs, self.labels.clone(), self.num_classes)
            .expect("symmetrising a valid graph yields a valid graph")
    }

    /// Induced subgraph on `keep` (in the given order), nodes renumbered
    /// `0..keep.len()`. Class count is preserved unless overridden.
    pub fn induced(&self, keep: &[usize], num_classes: Option<usize>) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n {
                return Err(Error::domain(format!("node {old} out of range")));
            }
            index[old] = new;
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&i| l[i]).collect::<Vec<_>>());
        let classes = num_classes.unwrap_or(self.num_classes);
        if self.directed {
            let neighbors = keep
                .iter()
                .map(|&i| {
                    self.neighbors[i]
                        .iter()
                        .filter_map(|&j| (index[j] != usize::MAX).then_some(index[j]))
                        .collect()
                })
                .collect();
            Graph::directed(neighbors, labels, classes)
        } else {
            let pairs = self.edges.iter().filter_map(|&(i, j)| {
                (index[i] != usize::MAX && index[j] != usize::MAX).then_some((index[i], index[j]))
            });
            Graph::undirected(keep.len(), pairs, labels, classes)
        }
    }
}

/// Global and per-node homophily of a labelled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HomophilyReport {
    pub global: f64,
    /// `None` for isolated nodes.
    pub local: Vec<Option<f64>>,
}

/// Fraction of stored edges whose endpoints share a label.
pub fn global_homophily(g: &Graph) -> Result<f64> {
    let labels = g.require_labels()?;
    if g.edges.is_empty() {
        return Err(Error::domain("global homophily of an edgeless graph"));
    }
    let same = g
        .edges
        .iter()
        .filter(|&&(i, j)| labels[i] == labels[j])
        .count();
    Ok(same as f64 / g.edges.len() as f64)
}

/// Fraction of node `i`'s neighbours that share its label.
pub fn local_homophily(g: &Graph, i: usize) -> Result<f64> {
    let labels = g.require_labels()?;
    if i >= g.n {
        return Err(Error::domain(format!("node {i} out of range")));
    }
    let nbrs = &g.neighbors[i];
    if nbrs.is_empty() {
        return Err(Error::domain(format!("node {i} is isolated")));
    }
    let same = nbrs.iter().filter(|&&j| labels[j] == labels[i]).count();
    Ok(same as f64 / nbrs.len() as f64)
}

pub fn homophily_report(g: &Graph) -> Result<HomophilyReport> {
    let global = global_homophily(g)?;
    let local = (0..g.n).map(|i| local_homophily(g, i).ok()).collect();
    Ok(HomophilyReport { global, local })
}

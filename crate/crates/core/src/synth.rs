//! Synthetic labelled graphs with controllable class count, homophily and
//! degree, plus Gaussian features around polar class means.
//!
//! Node `i` belongs to class `i / (n / C)`. Each node samples exactly `d`
//! distinct out-neighbours: with probability `b` from its own class, else
//! uniformly from the other `C − 1` classes. The same/other decision is kept
//! when a duplicate is redrawn, so realised local homophily is exactly
//! `Binomial(d, b) / d`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::FeatureMatrix;

const EMBEDDING_SEED: u64 = 0x05EE_D0FC_1A55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Total node count; must be a multiple of `num_classes`.
    pub n: usize,
    pub num_classes: usize,
    /// Target local homophily `b`.
    pub homophily: f64,
    /// Out-degree per node.
    pub degree: usize,
    pub mu: f64,
    pub sigma: f64,
    pub dim: usize,
    pub seed: u64,
    /// Return the undirected union of the sampled arcs instead of the
    /// directed neighbour-list graph.
    pub symmetrize: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1000,
            num_classes: 5,
            homophily: 0.5,
            degree: 8,
            mu: 1.0,
            sigma: 1.0,
            dim: 2,
            seed: 0,
            symmetrize: false,
        }
    }
}

impl SynthConfig {
    pub fn class_size(&self) -> usize {
        self.n / self.num_classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::domain("need at least two classes"));
        }
        if self.n == 0 || !self.n.is_multiple_of(self.num_classes) {
            return Err(Error::domain(format!(
                "n = {} is not a positive multiple of C = {}",
                self.n, self.num_classes
            )));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::domain(format!("homophily {} outside [0, 1]", self.homophily)));
        }
        if self.degree == 0 || self.degree >= self.n {
            return Err(Error::domain(format!("degree {} not in [1, n)", self.degree)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::domain(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("sigma = {} must be non-negative", self.sigma)));
        }
        if self.dim < 2 {
            return Err(Error::domain("feature dimension must be at least 2"));
        }
        let own_pool = self.class_size() - 1;
        let other_pool = self.n - self.class_size();
        if self.homophily > 0.0 && self.degree > own_pool {
            return Err(Error::domain(format!(
                "degree {} infeasible: only {own_pool} same-class candidates",
                self.degree
            )));
        }
        if self.homophily < 1.0 && self.degree > other_pool {
            return Err(Error::domain(format!(
                "degree {} infeasible: only {other_pool} other-class candidates",
                self.degree
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        let size = self.class_size();
        (0..self.n).map(|i| i / size).collect()
    }
}

/// Class `j` mean on the circle of radius `mu` at angle `2πj/C`.
///
/// For `dim > 2` the planar vector is embedded in the first two coordinates
/// and rotated by a fixed orthogonal matrix.
pub fn class_mean(j: usize, num_classes: usize, mu: f64, dim: usize) -> Result<Array1<f64>> {
    if dim < 2 {
        return Err(Error::domain("class means need dim >= 2"));
    }
    if num_classes == 0 || j >= num_classes {
        return Err(Error::domain(format!("class {j} not below {num_classes}")));
    }
    let angle = 2.0 * std::f64::consts::PI * j as f64 / num_classes as f64;
    let planar = [mu * angle.cos(), mu * angle.sin()];
    if dim == 2 {
        return Ok(Array1::from(planar.to_vec()));
    }
    let q = orthogonal_embedding(dim);
    Ok(q.column(0).to_owned() * planar[0] + &(q.column(1).to_owned() * planar[1]))
}

/// All class means as rows of a `C × dim` matrix.
pub fn class_means(num_classes: usize, mu: f64, dim: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((num_classes, dim));
    for j in 0..num_classes {
        out.row_mut(j).assign(&class_mean(j, num_classes, mu, dim)?);
    }
    Ok(out)
}

/// Fixed orthogonal matrix from Gram–Schmidt on a seeded Gaussian draw.
fn orthogonal_embedding(dim: usize) -> Array2<f64> {
    let mut rng = rng_from_seed(EMBEDDING_SEED ^ dim as u64);
    let mut q = Array2::<f64>::zeros((dim, dim));
    for c in 0..dim {
        loop {
            let mut v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            for prev in 0..c {
                let basis = q.column(prev).to_owned();
                let proj = v.dot(&basis);
                v.scaled_add(-proj, &basis);
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-6 {
                q.column_mut(c).assign(&(v / norm));
                break;
            }
        }
    }
    q
}

pub fn generate_graph(cfg: &SynthConfig) -> Result<Graph> {
    cfg.validate()?;
    let labels = cfg.labels();
    let size = cfg.class_size();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::GRAPH));
    let mut neighbors = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let own = labels[i];
        let mut chosen: Vec<usize> = Vec::with_capacity(cfg.degree);
        for _ in 0..cfg.degree {
            let same = rng.random_bool(cfg.homophily);
            let pick = loop {
                let candidate = if same {
                    own * size + rng.random_range(0..size)
                } else {
                    // uniform over the n - size nodes outside the own class
                    let r = rng.random_range(0..cfg.n - size);
                    if r >= own * size {
                        r + size
                    } else {
                        r
                    }
                };
                if candidate != i && !chosen.contains(&candidate) {
                    break candidate;
                }
            };
            chosen.push(pick);
        }
        chosen.sort_unstable();
        neighbors.push(chosen);
    }
    let g = Graph::directed(neighbors, Some(labels), cfg.num_classes)?;
    Ok(if cfg.symmetrize { g.symmetrized() } else { g })
}

/// Row `i` ~ N(class_mean(y_i), (sigma/√d_i)² I). Isolated nodes use d_i = 1.
pub fn generate_features(g: &Graph, cfg: &SynthConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let labels = g.require_labels()?;
    let means = class_means(cfg.num_classes, cfg.mu, cfg.dim)?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, stream::FEATURES));
    let mut x = Array2::zeros((g.num_nodes(), cfg.dim));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let y = labels[i];
        if y >= cfg.num_classes {
            return Err(Error::domain(format!("label {y} outside the configured classes")));
        }
        row.assign(&means.row(y));
        if cfg.sigma > 0.0 {
            let sd = cfg.sigma / (g.degree(i).max(1) as f64).sqrt();
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += sd * z;
            }
        }
    }
    Ok(x)
}

/// Graph and features in one call.
pub fn generate(cfg: &SynthConfig) -> Result<(Graph, FeatureMatrix)> {
    let g = generate_graph(cfg)?;
    let x = generate_features(&g, cfg)?;
    Ok((g, x))
}

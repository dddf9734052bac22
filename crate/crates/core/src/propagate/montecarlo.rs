//! Monte Carlo check of the one-hop expectation formulas.
//!
//! Each trial draws a fresh synthetic graph and feature matrix, propagates
//! once under every regime and records, for each node, the projection of the
//! propagated feature onto its own class mean (divided by `μ²`). The trial
//! statistic is the node-average of that projection minus the node-average
//! of the closed form evaluated at each node's own `d` and `d′`. A lattice
//! point passes when the mean of the trial statistics lies within three
//! standard errors of zero.
//!
//! Trial `t` of lattice point `p` uses seed `derive_seed(derive_seed(master, p), t)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{aggregate_wrong_class_mean, d_prime_all, expected_coeff, expected_vector_multiclass};
use crate::error::Result;
use crate::graph::{build_propagation_matrix, Mode};
use crate::rng::{derive_seed, stream};
use crate::synth::{class_means, generate, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub b: f64,
    pub e: f64,
    pub num_classes: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub trials: usize,
    /// Approximate node count per trial (rounded up to a multiple of C).
    pub nodes: usize,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Added to every closed-form value; nonzero only for fault injection.
    pub corrupt: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            trials: 100,
            nodes: 1000,
            mu: 1.0,
            sigma: 1.0,
            seed: 2024,
            corrupt: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub point: LatticePoint,
    pub mode: Mode,
    /// Mean projection coefficient over all trials.
    pub observed: f64,
    /// Mean closed-form coefficient over all trials.
    pub expected: f64,
    pub std_error: f64,
    pub pass: bool,
}

impl McCheck {
    /// Standardised deviation `(observed − expected) / std_error`.
    pub fn z_score(&self) -> f64 {
        let diff = self.observed - self.expected;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `b ∈ {0, .3, .5, .7, 1} × e ∈ {0, .1, .3} × C ∈ {2, 3, 5} × d ∈ {4, 16}`.
pub fn default_lattice() -> Vec<LatticePoint> {
    let mut out = Vec::new();
    for &num_classes in &[2, 3, 5] {
        for &degree in &[4, 16] {
            for &b in &[0.0, 0.3, 0.5, 0.7, 1.0] {
                for &e in &[0.0, 0.1, 0.3] {
                    out.push(LatticePoint { b, e, num_classes, degree });
                }
            }
        }
    }
    out
}

/// Per-node closed-form coefficient along the ego's class mean.
fn closed_form(
    mode: Mode,
    point: &LatticePoint,
    means: &Array2<f64>,
    class: usize,
    degree: usize,
    d_prime: f64,
    mu: f64,
) -> Result<f64> {
    if point.num_classes == 2 {
        return expected_coeff(mode, point.b, point.e, degree, d_prime);
    }
    let k = means.row(class);
    let k_prime = aggregate_wrong_class_mean(means.view(), class, None)?;
    let v = expected_vector_multiclass(mode, point.b, point.e, k, k_prime.view(), degree, d_prime)?;
    Ok(v.dot(&k) / (mu * mu))
}

/// Runs every regime at one lattice point. `point_seed` should differ per point.
pub fn check_point(point: &LatticePoint, cfg: &McConfig, point_seed: u64) -> Result<Vec<McCheck>> {
    let c = point.num_classes;
    let n = cfg.nodes.div_ceil(c) * c;
    let means = class_means(c, cfg.mu, 2)?;
    let mut diffs: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.trials); Mode::ALL.len()];
    let mut observed = vec![0.0; Mode::ALL.len()];
    let mut expected = vec![0.0; Mode::ALL.len()];

    for t in 0..cfg.trials {
        let trial_seed = derive_seed(point_seed, t as u64);
        let synth = SynthConfig {
            n,
            num_classes: c,
            homophily: point.b,
            degree: point.degree,
            mu: cfg.mu,
            sigma: cfg.sigma,
            dim: 2,
            seed: trial_seed,
            symmetrize: false,
        };
        let (g, x) = generate(&synth)?;
        let labels = g.labels().expect("synthetic graphs are labelled");
        let dps = d_prime_all(&g);
        for (m, &mode) in Mode::ALL.iter().enumerate() {
            let sign_seed = derive_seed(trial_seed, stream::SIGNS + 16 * m as u64);
            let p = build_propagation_matrix(&g, mode, point.e, sign_seed)?;
            let h = p.apply(x.view())?;
            let mut obs = 0.0;
            let mut exp = 0.0;
            for i in 0..n {
                let y = labels[i];
                obs += h.row(i).dot(&means.row(y)) / (cfg.mu * cfg.mu);
                exp += closed_form(mode, point, &means, y, g.degree(i), dps[i], cfg.mu)? + cfg.corrupt;
            }
            obs /= n as f64;
            exp /= n as f64;
            observed[m] += obs;
            expected[m] += exp;
            diffs[m].push(obs - exp);
        }
    }

    let trials = cfg.trials as f64;
    Ok(Mode::ALL
        .iter()
        .enumerate()
        .map(|(m, &mode)| {
            let d = &diffs[m];
            let mean = d.iter().sum::<f64>() / trials;
            let var = if d.len() > 1 {
                d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1.0)
            } else {
                0.0
            };
            let std_error = (var / trials).sqrt();
            McCheck {
                point: *point,
                mode,
                observed: observed[m] / trials,
                expected: expected[m] / trials,
                std_error,
                pass: mean.abs() <= 3.0 * std_error + 1e-12,
            }
        })
        .collect())
}

/// Runs a full lattice; point `p` gets seed `derive_seed(cfg.seed, p)`.
pub fn run_lattice(points: &[LatticePoint], cfg: &McConfig) -> Result<Vec<McCheck>> {
    let mut out = Vec::with_capacity(points.len() * Mode::ALL.len());
    for (idx, point) in points.iter().enumerate() {
        out.extend(check_point(point, cfg, derive_seed(cfg.seed, idx as u64))?);
    }
    Ok(out)
}

//! Entropy and dissonance of class-probability vectors, and the one-step
//! update model showing how the entropy of a signed neighbour and a plain
//! neighbour drift apart during training.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("empty probability vector"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("probability {v} is not in [0, 1]")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!("probabilities sum to {total}")));
        }
        Ok(ProbabilityVector(values))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::domain("no classes"));
        }
        Self::new(vec![1.0 / classes as f64; classes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

/// Shannon entropy in base `C`, with `0·log 0 = 0`. Lies in `[0, 1]`.
pub fn entropy(p: &ProbabilityVector) -> Result<f64> {
    entropy_slice(p.values())
}

pub(crate) fn entropy_slice(p: &[f64]) -> Result<f64> {
    let c = p.len();
    if c < 2 {
        return Err(Error::domain("entropy needs at least two classes"));
    }
    let base = (c as f64).ln();
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
    Ok((h / base).clamp(0.0, 1.0))
}

/// Dissonance: for each class `j`, the mass-weighted balance
/// `1 − |p_k − p_j|/(p_j + p_k)` against every other class `k`, averaged
/// with weights `p_k / Σ_{k≠j} p_k`, then weighted by `p_j`.
///
/// Only strictly positive entries take part. A vector with a single
/// nonzero entry has no conflicting mass and returns 0.
pub fn dissonance(p: &ProbabilityVector) -> f64 {
    dissonance_slice(p.values())
}

pub(crate) fn dissonance_slice(p: &[f64]) -> f64 {
    let pos: Vec<f64> = p.iter().copied().filter(|&v| v > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    let total: f64 = pos.iter().sum();
    let mut diss = 0.0;
    for (j, &pj) in pos.iter().enumerate() {
        let others = total - pj;
        let mut weighted = 0.0;
        for (k, &pk) in pos.iter().enumerate() {
            if k != j {
                weighted += pk * (1.0 - (pk - pj).abs() / (pj + pk));
            }
        }
        diss += pj * weighted / others;
    }
    diss.clamp(0.0, 1.0)
}

/// Mean dissonance of the rows of `probs` listed in `nodes`.
pub fn mean_dissonance(probs: ArrayView2<'_, f64>, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::domain("mean dissonance over an empty node set"));
    }
    let mut acc = 0.0;
    for &i in nodes {
        if i >= probs.nrows() {
            return Err(Error::domain(format!("node {i} out of range")));
        }
        let row = probs.row(i);
        acc += match row.as_slice() {
            Some(s) => dissonance_slice(s),
            None => dissonance_slice(&row.to_vec()),
        };
    }
    Ok(acc / nodes.len() as f64)
}

/// Direction of the one-step update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Neighbour joined by a plain (positive) edge: pulled toward the true class.
    Plane,
    /// Neighbour joined by a signed edge: pushed away from the true class.
    Signed,
}

/// One gradient step on a neighbour's prediction.
///
/// Each wrong class moves by `alpha` and the true class by `(C − 1)·alpha`
/// in the opposite direction, so the vector stays normalised. With
/// `[0.6, 0.2, 0.2]` and `alpha = 0.1` this gives `[0.8, 0.1, 0.1]` (plane)
/// and `[0.4, 0.3, 0.3]` (signed).
pub fn one_step_update(
    p: &ProbabilityVector,
    alpha: f64,
    true_class: usize,
    mode: UpdateMode,
) -> Result<ProbabilityVector> {
    let c = p.num_classes();
    if c < 2 {
        return Err(Error::domain("update needs at least two classes"));
    }
    if true_class >= c {
        return Err(Error::domain(format!("class {true_class} not below {c}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::domain(format!("alpha = {alpha} must be non-negative")));
    }
    let dir = match mode {
        UpdateMode::Plane => 1.0,
        UpdateMode::Signed => -1.0,
    };
    let true_step = dir * (c - 1) as f64 * alpha;
    let out: Vec<f64> = p
        .values()
        .iter()
        .enumerate()
        .map(|(j, &v)| if j == true_class { v + true_step } else { v - dir * alpha })
        .collect();
    if let Some(bad) = out.iter().find(|&&v| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v)) {
        return Err(Error::domain(format!("update leaves the simplex (entry {bad})")));
    }
    let out = out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    ProbabilityVector::new(out)
}

/// Entropy gap `E(signed) − E(plane)` after each of `steps` updates from a
/// common start.
///
/// With equal wrong-class masses the gap is strictly increasing along the
/// whole interior trajectory whenever the start puts more than half its mass
/// on the true class.
pub fn entropy_gap_trajectory(
    p0: &ProbabilityVector,
    alpha: f64,
    true_class: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut plane = p0.clone();
    let mut signed = p0.clone();
    let mut gaps = Vec::with_capacity(steps);
    for _ in 0..steps {
        plane = one_step_update(&plane, alpha, true_class, UpdateMode::Plane)?;
        signed = one_step_update(&signed, alpha, true_class, UpdateMode::Signed)?;
        gaps.push(entropy(&signed)? - entropy(&plane)?);
    }
    Ok(gaps)
}

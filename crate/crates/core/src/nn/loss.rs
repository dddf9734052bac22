use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Mean negative log-probability of the true class over `nodes`.
pub fn nll_loss(log_probs: ArrayView2<'_, f64>, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::domain("NLL over an empty node set"));
    }
    let mut acc = 0.0;
    for &i in nodes {
        let y = *labels
            .get(i)
            .ok_or_else(|| Error::domain(format!("node {i} has no label")))?;
        acc -= log_probs[[i, y]];
    }
    Ok(acc / nodes.len() as f64)
}

/// Mean of `submax(ŷ_i) − max(ŷ_i)` over `nodes`; lies in `[−1, 0]`.
pub fn calib_loss(probs: ArrayView2<'_, f64>, nodes: &[usize]) -> Result<f64> {
    if probs.ncols() < 2 {
        return Err(Error::domain("calibration loss needs at least two classes"));
    }
    if nodes.is_empty() {
        return Err(Error::domain("calibration loss over an empty node set"));
    }
    let mut acc = 0.0;
    for &i in nodes {
        let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &v in probs.row(i) {
            if v > top {
                second = top;
                top = v;
            } else if v > second {
                second = v;
            }
        }
        acc += second - top;
    }
    Ok(acc / nodes.len() as f64)
}

pub fn total_loss(nll: f64, calib: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(nll + lambda * calib)
}

/// Fraction of `nodes` whose arg-max prediction equals the label.
pub fn accuracy(probs: ArrayView2<'_, f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| {
            let row = probs.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best == labels[i]
        })
        .count();
    hits as f64 / nodes.len() as f64
}

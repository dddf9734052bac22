//! Browser bindings for three parameter explorers: discrimination-gap
//! surfaces, expected one-hop coefficients and entropy-gap trajectories.
//!
//! Each export is a thin wrapper over a plain function that returns
//! `Result<_, String>`, so the numerics are testable on the host.

use hetsign_core::graph::Mode;
use hetsign_core::propagate::{expected_coeff, z_surface, ZCase};
use hetsign_core::uncertainty::{entropy, one_step_update, ProbabilityVector, UpdateMode};
use wasm_bindgen::prelude::*;

/// Row-major `resolution × resolution` grid with `values[ie * resolution + ib] = Z(e, b)`.
pub fn z_grid(case: &str, resolution: usize) -> Result<Vec<f64>, String> {
    let case: ZCase = case.parse().map_err(|e| format!("{e}"))?;
    let s = z_surface(case, resolution).map_err(|e| e.to_string())?;
    Ok(s.values.iter().copied().collect())
}

pub fn z_mean(case: &str, resolution: usize) -> Result<f64, String> {
    let case: ZCase = case.parse().map_err(|e| format!("{e}"))?;
    Ok(z_surface(case, resolution).map_err(|e| e.to_string())?.integral())
}

/// Expected coefficient at `points` evenly spaced homophily values in `[0, 1]`,
/// for a node whose neighbours all share its degree (so `d′ = d`).
pub fn coefficients(mode: &str, e: f64, degree: usize, points: usize) -> Result<Vec<f64>, String> {
    let mode: Mode = mode.parse().map_err(|e| format!("{e}"))?;
    if points < 2 {
        return Err("need at least two points".into());
    }
    (0..points)
        .map(|i| {
            let b = i as f64 / (points - 1) as f64;
            expected_coeff(mode, b, e, degree, degree as f64).map_err(|e| e.to_string())
        })
        .collect()
}

/// Entropy of the signed neighbour minus that of the plain neighbour after
/// each update, starting from `p_true` on the true class and the rest spread
/// evenly. Stops early once either vector would leave the simplex.
pub fn entropy_gaps(p_true: f64, classes: usize, alpha: f64, steps: usize) -> Result<Vec<f64>, String> {
    if classes < 2 {
        return Err("need at least two classes".into());
    }
    let rest = (1.0 - p_true) / (classes - 1) as f64;
    let mut values = vec![rest; classes];
    values[0] = p_true;
    let start = ProbabilityVector::new(values).map_err(|e| e.to_string())?;
    let (mut plane, mut signed) = (start.clone(), start);
    let mut gaps = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (Ok(p), Ok(s)) = (
            one_step_update(&plane, alpha, 0, UpdateMode::Plane),
            one_step_update(&signed, alpha, 0, UpdateMode::Signed),
        ) else {
            break;
        };
        let gap = entropy(&s).map_err(|e| e.to_string())? - entropy(&p).map_err(|e| e.to_string())?;
        gaps.push(gap);
        plane = p;
        signed = s;
    }
    Ok(gaps)
}

#[wasm_bindgen(js_name = zSurface)]
pub fn z_surface_js(case: &str, resolution: usize) -> Result<Vec<f64>, JsError> {
    z_grid(case, resolution).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = zMean)]
pub fn z_mean_js(case: &str, resolution: usize) -> Result<f64, JsError> {
    z_mean(case, resolution).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = coefficientCurve)]
pub fn coefficient_curve_js(mode: &str, e: f64, degree: usize, points: usize) -> Result<Vec<f64>, JsError> {
    coefficients(mode, e, degree, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = entropyGap)]
pub fn entropy_gap_js(p_true: f64, classes: usize, alpha: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    entropy_gaps(p_true, classes, alpha, steps).map_err(|e| JsError::new(&e))
}

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::GcnParams;
use crate::error::{Error, Result};
use crate::graph::PropagationMatrix;

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `P · X · W0`, before the rectifier.
    pub pre_activation: Array2<f64>,
    /// Inverted-dropout scale per hidden unit (`0` or `1/(1−rate)`), if any.
    pub dropout_mask: Option<Array2<f64>>,
    /// `relu(pre_activation) ⊙ mask`.
    pub hidden: Array2<f64>,
    pub logits: Array2<f64>,
    pub log_probs: Array2<f64>,
    pub probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

/// Inverted-dropout mask of shape `rows × cols`.
pub fn dropout_mask<R: Rng>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

pub fn gcn_forward(
    x: ArrayView2<'_, f64>,
    p: &PropagationMatrix,
    params: &GcnParams,
    dropout_mask: Option<Array2<f64>>,
) -> Result<ForwardPass> {
    if x.ncols() != params.w0.nrows() {
        return Err(Error::domain(format!(
            "features have {} columns, W0 expects {}",
            x.ncols(),
            params.w0.nrows()
        )));
    }
    if params.w0.ncols() != params.w1.nrows() {
        return Err(Error::domain("W0 and W1 disagree on the hidden width"));
    }
    let pre_activation = p.apply(x.dot(&params.w0).view())?;
    let mut hidden = pre_activation.mapv(|v| v.max(0.0));
    if let Some(mask) = &dropout_mask {
        if mask.dim() != hidden.dim() {
            return Err(Error::domain("dropout mask shape mismatch"));
        }
        hidden *= mask;
    }
    let logits = p.apply(hidden.dot(&params.w1).view())?;
    let log_probs = log_softmax(&logits);
    let probs = log_probs.mapv(f64::exp);
    if !log_probs.iter().all(|v| v.is_finite()) {
        return Err(Error::domain("non-finite log-probabilities"));
    }
    Ok(ForwardPass {
        pre_activation,
        dropout_mask,
        hidden,
        logits,
        log_probs,
        probs,
    })
}

fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Subgradient of `−max(p) + submax(p)` with respect to `p`.
///
/// Ties share their unit of gradient evenly; a tie at the top cancels.
pub(crate) fn calib_grad_wrt_probs(p: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    let top = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied_top: Vec<usize> = (0..p.len()).filter(|&j| p[j] == top).collect();
    if tied_top.len() >= 2 {
        return g;
    }
    let m1 = tied_top[0];
    let second = (0..p.len())
        .filter(|&j| j != m1)
        .map(|j| p[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let tied_second: Vec<usize> = (0..p.len()).filter(|&j| j != m1 && p[j] == second).collect();
    g[m1] = -1.0;
    let share = 1.0 / tied_second.len() as f64;
    for j in tied_second {
        g[j] = share;
    }
    g
}

/// Exact gradients of `nll(train) + λ·calib(calib_nodes)` with respect to
/// `W0` and `W1` (weight decay is added by the optimiser).
///
/// For a training node `i` with true class `k`, the logit gradient is
/// `(ŷ_ik − 1)/|train|` at `k` and `ŷ_io/|train|` elsewhere.
#[allow(clippy::too_many_arguments)]
pub fn backward(
    pass: &ForwardPass,
    x: ArrayView2<'_, f64>,
    p: &PropagationMatrix,
    params: &GcnParams,
    labels: &[usize],
    train_nodes: &[usize],
    calib_nodes: &[usize],
    lambda: f64,
) -> Result<Gradients> {
    let d_logits = logit_gradient(pass, labels, train_nodes, calib_nodes, lambda)?;
    // logits = P · (H · W1)
    let d_hw1 = p.apply_transpose(d_logits.view())?;
    let w1 = pass.hidden.t().dot(&d_hw1);
    let mut d_hidden = d_hw1.dot(&params.w1.t());
    if let Some(mask) = &pass.dropout_mask {
        d_hidden *= mask;
    }
    Zip::from(&mut d_hidden)
        .and(&pass.pre_activation)
        .for_each(|g, &a| {
            if a <= 0.0 {
                *g = 0.0;
            }
        });
    // pre_activation = P · (X · W0)
    let d_xw0 = p.apply_transpose(d_hidden.view())?;
    let w0 = x.t().dot(&d_xw0);
    Ok(Gradients { w0, w1 })
}

/// Gradient of the total loss with respect to the logits.
pub fn logit_gradient(
    pass: &ForwardPass,
    labels: &[usize],
    train_nodes: &[usize],
    calib_nodes: &[usize],
    lambda: f64,
) -> Result<Array2<f64>> {
    if train_nodes.is_empty() {
        return Err(Error::domain("no training nodes"));
    }
    let probs = &pass.probs;
    let mut d = Array2::zeros(probs.dim());
    let scale = 1.0 / train_nodes.len() as f64;
    for &i in train_nodes {
        let y = *labels
            .get(i)
            .ok_or_else(|| Error::domain(format!("training node {i} has no label")))?;
        let mut row = d.row_mut(i);
        row.scaled_add(scale, &probs.row(i));
        row[y] -= scale;
    }
    if lambda != 0.0 && !calib_nodes.is_empty() {
        let scale = lambda / calib_nodes.len() as f64;
        for &i in calib_nodes {
            let p_row = probs.row(i).to_vec();
            let g = calib_grad_wrt_probs(&p_row);
            let inner: f64 = p_row.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut row = d.row_mut(i);
            for j in 0..p_row.len() {
                row[j] += scale * p_row[j] * (g[j] - inner);
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_propagation_matrix, Graph, Mode};
    use crate::nn::loss::{calib_loss, nll_loss, total_loss};
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn isolated_node_identity_weights() {
        let x = ndarray::array![[0.5, 2.0, 0.0]];
        let p = PropagationMatrix::identity(1);
        let eye = Array2::eye(3);
        let params = GcnParams { w0: eye.clone(), w1: eye, init: super::super::InitScheme::GlorotUniform };
        let pass = gcn_forward(x.view(), &p, &params, None).unwrap();
        assert_eq!(pass.logits, x);
        let s: f64 = pass.probs.row(0).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn calib_subgradient_ties() {
        assert_eq!(calib_grad_wrt_probs(&[0.6, 0.3, 0.1]), vec![-1.0, 1.0, 0.0]);
        assert_eq!(calib_grad_wrt_probs(&[0.4, 0.4, 0.2]), vec![0.0, 0.0, 0.0]);
        assert_eq!(calib_grad_wrt_probs(&[0.6, 0.2, 0.2]), vec![-1.0, 0.5, 0.5]);
    }

    struct Instance {
        x: Array2<f64>,
        p: PropagationMatrix,
        params: GcnParams,
        labels: Vec<usize>,
        train: Vec<usize>,
        calib: Vec<usize>,
    }

    fn random_instance(seed: u64) -> Instance {
        let mut rng = rng_from_seed(seed);
        let (n, f, h, c) = (9, 5, 4, 3);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (0, 4), (2, 7), (1, 8)];
        let g = Graph::undirected(n, pairs, Some(labels.clone()), c).unwrap();
        let p = build_propagation_matrix(&g, Mode::Signed, 0.2, seed).unwrap();
        let x = Array2::from_shape_simple_fn((n, f), || StandardNormal.sample(&mut rng));
        let params = GcnParams::glorot(f, h, c, seed).unwrap();
        Instance { x, p, params, labels, train: vec![0, 1, 2, 5], calib: vec![3, 4, 6, 7, 8] }
    }

    fn loss_at(inst: &Instance, params: &GcnParams, lambda: f64) -> f64 {
        let pass = gcn_forward(inst.x.view(), &inst.p, params, None).unwrap();
        let nll = nll_loss(pass.log_probs.view(), &inst.labels, &inst.train).unwrap();
        let cal = calib_loss(pass.probs.view(), &inst.calib).unwrap();
        total_loss(nll, cal, lambda).unwrap()
    }

    /// Central differences, h = 1e-5.
    fn finite_difference(inst: &Instance, lambda: f64) -> Gradients {
        let h = 1e-5;
        let mut g0 = Array2::zeros(inst.params.w0.dim());
        let mut g1 = Array2::zeros(inst.params.w1.dim());
        for idx in ndarray::indices(inst.params.w0.dim()) {
            let mut plus = inst.params.clone();
            plus.w0[idx] += h;
            let mut minus = inst.params.clone();
            minus.w0[idx] -= h;
            g0[idx] = (loss_at(inst, &plus, lambda) - loss_at(inst, &minus, lambda)) / (2.0 * h);
        }
        for idx in ndarray::indices(inst.params.w1.dim()) {
            let mut plus = inst.params.clone();
            plus.w1[idx] += h;
            let mut minus = inst.params.clone();
            minus.w1[idx] -= h;
            g1[idx] = (loss_at(inst, &plus, lambda) - loss_at(inst, &minus, lambda)) / (2.0 * h);
        }
        Gradients { w0: g0, w1: g1 }
    }

    fn max_rel_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let inst = random_instance(seed);
            for lambda in [0.0, 0.7] {
                let pass = gcn_forward(inst.x.view(), &inst.p, &inst.params, None).unwrap();
                let g = backward(&pass, inst.x.view(), &inst.p, &inst.params, &inst.labels, &inst.train, &inst.calib, lambda)
                    .unwrap();
                let fd = finite_difference(&inst, lambda);
                assert!(max_rel_error(&g.w0, &fd.w0) < 1e-4, "seed {seed} λ {lambda} W0");
                assert!(max_rel_error(&g.w1, &fd.w1) < 1e-4, "seed {seed} λ {lambda} W1");
            }
        }
    }

    #[test]
    fn total_gradient_is_sum_of_parts() {
        let inst = random_instance(17);
        let pass = gcn_forward(inst.x.view(), &inst.p, &inst.params, None).unwrap();
        let run = |train: &[usize], lambda| {
            backward(&pass, inst.x.view(), &inst.p, &inst.params, &inst.labels, train, &inst.calib, lambda).unwrap()
        };
        let nll_only = run(&inst.train, 0.0);
        let both = run(&inst.train, 0.4);
        let fd_calib = {
            let h = 1e-5;
            let calib_at = |params: &GcnParams| {
                let pass = gcn_forward(inst.x.view(), &inst.p, params, None).unwrap();
                calib_loss(pass.probs.view(), &inst.calib).unwrap()
            };
            Array2::from_shape_fn(inst.params.w1.dim(), |idx| {
                let mut plus = inst.params.clone();
                plus.w1[idx] += h;
                let mut minus = inst.params.clone();
                minus.w1[idx] -= h;
                (calib_at(&plus) - calib_at(&minus)) / (2.0 * h)
            })
        };
        let combined = &nll_only.w1 + &(fd_calib * 0.4);
        assert!(max_rel_error(&both.w1, &combined) < 1e-4);
    }

    #[test]
    fn true_class_logit_gradient_closed_form() {
        let inst = random_instance(3);
        let pass = gcn_forward(inst.x.view(), &inst.p, &inst.params, None).unwrap();
        let d = logit_gradient(&pass, &inst.labels, &inst.train, &[], 0.0).unwrap();
        let t = inst.train.len() as f64;
        for &i in &inst.train {
            let y = inst.labels[i];
            assert_abs_diff_eq!(d[[i, y]], (pass.probs[[i, y]] - 1.0) / t, epsilon = 1e-12);
            assert!(d[[i, y]] < 0.0);
            for o in (0..3).filter(|&o| o != y) {
                assert_abs_diff_eq!(d[[i, o]], pass.probs[[i, o]] / t, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn forward_matches_straight_line_evaluator() {
        let inst = random_instance(8);
        let pass = gcn_forward(inst.x.view(), &inst.p, &inst.params, None).unwrap();
        let dense = inst.p.to_dense();
        let n = inst.x.nrows();
        // triple loops, no shared helpers
        let mut a0 = Array2::<f64>::zeros((n, inst.params.hidden()));
        for i in 0..n {
            for k in 0..inst.params.hidden() {
                let mut s = 0.0;
                for j in 0..n {
                    for f in 0..inst.x.ncols() {
                        s += dense[[i, j]] * inst.x[[j, f]] * inst.params.w0[[f, k]];
                    }
                }
                a0[[i, k]] = s.max(0.0);
            }
        }
        for i in 0..n {
            let mut z = [0.0; 3];
            for (c, zc) in z.iter_mut().enumerate() {
                for j in 0..n {
                    for k in 0..inst.params.hidden() {
                        *zc += dense[[i, j]] * a0[[j, k]] * inst.params.w1[[k, c]];
                    }
                }
            }
            let norm: f64 = z.iter().map(|v| v.exp()).sum();
            for c in 0..3 {
                assert_abs_diff_eq!(pass.probs[[i, c]], z[c].exp() / norm, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(pass.probs.row(i).sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn shape_errors() {
        let inst = random_instance(1);
        let bad = ndarray::Array2::zeros((inst.x.nrows(), 2));
        assert!(gcn_forward(bad.view(), &inst.p, &inst.params, None).is_err());
    }
}

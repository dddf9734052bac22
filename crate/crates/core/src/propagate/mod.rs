//! Linear propagation and its closed-form one-hop expectations.
//!
//! For an ego of class `k` with degree `d` and scaled neighbour-degree sum
//! `d′ = Σ_j √((d+1)/(d_j+1))`, one propagation step moves the expected
//! feature to `(neighbour_term · d′ + k) / (d + 1)`. The neighbour term
//! depends on the regime; see [`expected_coeff`] (two classes, `±μ` means)
//! and [`expected_vector_multiclass`] (polar class means, wrong classes
//! aggregated into a single `k′`).

pub mod montecarlo;

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Mode, PropagationMatrix};
use crate::FeatureMatrix;

/// Applies `p` to `h` `hops` times.
pub fn propagate(h: ArrayView2<'_, f64>, p: &PropagationMatrix, hops: usize) -> Result<FeatureMatrix> {
    if h.nrows() != p.num_nodes() {
        return Err(Error::domain(format!(
            "features have {} rows, operator has {}",
            h.nrows(),
            p.num_nodes()
        )));
    }
    let mut out = h.to_owned();
    for _ in 0..hops {
        out = p.apply(out.view())?;
    }
    Ok(out)
}

/// `Σ_j √((d_i+1)/(d_j+1))` over the neighbours of `i`.
pub fn d_prime(degree: usize, neighbor_degrees: &[usize]) -> Result<f64> {
    if neighbor_degrees.len() != degree {
        return Err(Error::domain(format!(
            "{} neighbour degrees for a node of degree {degree}",
            neighbor_degrees.len()
        )));
    }
    let own = (degree + 1) as f64;
    Ok(neighbor_degrees
        .iter()
        .map(|&dj| (own / (dj + 1) as f64).sqrt())
        .sum())
}

/// `d′` for every node of `g`.
pub fn d_prime_all(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes())
        .map(|i| {
            let degs: Vec<usize> = g.neighbors(i).iter().map(|&j| g.degree(j)).collect();
            d_prime(g.degree(i), &degs).expect("lengths agree by construction")
        })
        .collect()
}

/// Binary-class coefficient of `E[h⁽⁰⁾ | y]` after one hop.
///
/// - vanilla: `((2b − 1)d′ + 1)/(d + 1)`
/// - signed: `((1 − 2e)d′ + 1)/(d + 1)`
/// - zero: `((b − e)d′ + 1)/(d + 1)`
pub fn expected_coeff(mode: Mode, b: f64, e: f64, degree: usize, d_prime: f64) -> Result<f64> {
    check_unit("b", b)?;
    check_unit("e", e)?;
    let neighbor = match mode {
        Mode::Vanilla => 2.0 * b - 1.0,
        Mode::Signed => 1.0 - 2.0 * e,
        Mode::Zero => b - e,
    };
    Ok((neighbor * d_prime + 1.0) / (degree as f64 + 1.0))
}

/// Multi-class expectation with ego mean `k` and aggregated wrong-class mean
/// `k′`:
///
/// - signed: `[(1 − 2e)(b·k + (b − 1)·k′)·d′ + k]/(d + 1)`
/// - zero: `[((1 − e)·b·k + e(1 − b)·k′)·d′ + k]/(d + 1)`
/// - vanilla (two-mean form): `[(b·k + (1 − b)·k′)·d′ + k]/(d + 1)`
pub fn expected_vector_multiclass(
    mode: Mode,
    b: f64,
    e: f64,
    k: ArrayView1<'_, f64>,
    k_prime: ArrayView1<'_, f64>,
    degree: usize,
    d_prime: f64,
) -> Result<Array1<f64>> {
    check_unit("b", b)?;
    check_unit("e", e)?;
    if k.len() != k_prime.len() {
        return Err(Error::domain("k and k' differ in dimension"));
    }
    let nk = k.dot(&k).sqrt();
    let nkp = k_prime.dot(&k_prime).sqrt();
    if nkp > nk * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::domain(format!("|k'| = {nkp} exceeds |k| = {nk}")));
    }
    let (ck, ckp) = match mode {
        Mode::Signed => ((1.0 - 2.0 * e) * b, (1.0 - 2.0 * e) * (b - 1.0)),
        Mode::Zero => ((1.0 - e) * b, e * (1.0 - b)),
        Mode::Vanilla => (b, 1.0 - b),
    };
    let neighbor = &k * ck + &k_prime * ckp;
    Ok((neighbor * d_prime + k) / (degree as f64 + 1.0))
}

/// Mean of the class means other than `own`, weighted by `weights` (uniform
/// when `None`). This is the `k′` seen by an ego whose heterophilous
/// neighbours follow that class distribution.
pub fn aggregate_wrong_class_mean(
    means: ArrayView2<'_, f64>,
    own: usize,
    weights: Option<&[f64]>,
) -> Result<Array1<f64>> {
    let c = means.nrows();
    if own >= c || c < 2 {
        return Err(Error::domain(format!("class {own} of {c}")));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == c => w.to_vec(),
        Some(w) => return Err(Error::domain(format!("{} weights for {c} classes", w.len()))),
        None => vec![1.0; c],
    };
    let total: f64 = w.iter().enumerate().filter(|&(j, _)| j != own).map(|(_, v)| v).sum();
    if !(total > 0.0) {
        return Err(Error::domain("wrong-class weights sum to zero"));
    }
    let mut out = Array1::zeros(means.ncols());
    for j in (0..c).filter(|&j| j != own) {
        out.scaled_add(w[j] / total, &means.row(j));
    }
    Ok(out)
}

/// Binary discrimination gap between signed and zero-weight propagation.
pub fn z_binary(e: f64, b: f64) -> f64 {
    1.0 - e - b
}

/// Multi-class gap `−e·b·k + (1 − e)(b − 1)·k′`.
pub fn z_multi(e: f64, b: f64, k: ArrayView1<'_, f64>, k_prime: ArrayView1<'_, f64>) -> Array1<f64> {
    &k * (-e * b) + &(&k_prime * ((1.0 - e) * (b - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZCase {
    Binary,
    /// Multi-class with `k′ = −k`.
    MultiOpposite,
    /// Multi-class with `k′ = k`.
    MultiSame,
}

impl ZCase {
    pub const ALL: [ZCase; 3] = [ZCase::Binary, ZCase::MultiOpposite, ZCase::MultiSame];

    pub fn name(self) -> &'static str {
        match self {
            ZCase::Binary => "binary",
            ZCase::MultiOpposite => "multi_k'_eq_minus_k",
            ZCase::MultiSame => "multi_k'_eq_k",
        }
    }

    /// Scalar `Z` along the unit ego direction.
    pub fn eval(self, e: f64, b: f64) -> f64 {
        let k = [1.0];
        match self {
            ZCase::Binary => z_binary(e, b),
            ZCase::MultiOpposite => z_multi(e, b, ArrayView1::from(&k), ArrayView1::from(&[-1.0]))[0],
            ZCase::MultiSame => z_multi(e, b, ArrayView1::from(&k), ArrayView1::from(&k))[0],
        }
    }
}

impl FromStr for ZCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ZCase::ALL
            .into_iter()
            .find(|c| c.name() == s || format!("{c:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::domain(format!("unknown Z case {s:?}")))
    }
}

/// `Z` sampled on a uniform `(e, b)` grid over `[0, 1]²`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSurface {
    pub case: ZCase,
    pub grid: Vec<f64>,
    /// `values[[ie, ib]] = Z(grid[ie], grid[ib])`.
    pub values: Array2<f64>,
}

pub fn z_surface(case: ZCase, resolution: usize) -> Result<ZSurface> {
    if resolution < 2 {
        return Err(Error::domain("Z surface needs resolution >= 2"));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| i as f64 * step).collect();
    let values = Array2::from_shape_fn((resolution, resolution), |(ie, ib)| {
        case.eval(grid[ie], grid[ib])
    });
    Ok(ZSurface { case, grid, values })
}

impl ZSurface {
    /// Composite trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        let n = self.grid.len();
        let h = 1.0 / (n - 1) as f64;
        let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for ie in 0..n {
            for ib in 0..n {
                acc += weight(ie) * weight(ib) * self.values[[ie, ib]];
            }
        }
        acc * h * h
    }

    /// CSV with header `e,b,Z`, one row per grid point, `e` outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("e,b,Z\n");
        for (ie, e) in self.grid.iter().enumerate() {
            for (ib, b) in self.grid.iter().enumerate() {
                let _ = writeln!(out, "{e},{b},{}", self.values[[ie, ib]]);
            }
        }
        out
    }
}

/// Midpoint-rule integral of `case` over `[0, 1]²` with `cells²` cells.
pub fn z_integral_midpoint(case: ZCase, cells: usize) -> Result<f64> {
    if cells == 0 {
        return Err(Error::domain("need at least one cell"));
    }
    let h = 1.0 / cells as f64;
    let mut acc = 0.0;
    for ie in 0..cells {
        let e = (ie as f64 + 0.5) * h;
        let mut row = 0.0;
        for ib in 0..cells {
            row += case.eval(e, (ib as f64 + 0.5) * h);
        }
        acc += row;
    }
    Ok(acc * h * h)
}

/// Product of edge signs along a label path (+1 same label, −1 otherwise).
pub fn path_sign(labels: &[usize]) -> Result<i8> {
    if labels.len() < 2 {
        return Err(Error::domain("a path needs at least two nodes"));
    }
    Ok(labels
        .windows(2)
        .map(|w| if w[0] == w[1] { 1i8 } else { -1 })
        .product())
}

/// Number of walks an exact multi-hop sign assignment would have to inspect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathCount {
    pub count: u64,
    pub saturated: bool,
}

/// `Σ_{l=2..L} Σ_i Σ_{j≥i} (A^l)_ij`, by repeated sparse multiplication from
/// each source node.
pub fn path_enumeration_cost(g: &Graph, max_len: usize) -> Result<PathCount> {
    if max_len < 2 {
        return Err(Error::domain("path length must be at least 2"));
    }
    let n = g.num_nodes();
    let mut total: u64 = 0;
    let mut saturated = false;
    let mut current = vec![0u64; n];
    let mut next = vec![0u64; n];
    for src in 0..n {
        current.iter_mut().for_each(|v| *v = 0);
        current[src] = 1;
        for len in 1..=max_len {
            next.iter_mut().for_each(|v| *v = 0);
            for (u, &walks) in current.iter().enumerate() {
                if walks == 0 {
                    continue;
                }
                for &v in g.neighbors(u) {
                    let (sum, over) = next[v].overflowing_add(walks);
                    next[v] = if over { u64::MAX } else { sum };
                    saturated |= over;
                }
            }
            std::mem::swap(&mut current, &mut next);
            if len >= 2 {
                for &walks in &current[src..] {
                    let (sum, over) = total.overflowing_add(walks);
                    total = if over { u64::MAX } else { sum };
                    saturated |= over || walks == u64::MAX;
                }
            }
        }
    }
    Ok(PathCount { count: total, saturated })
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_propagation_matrix;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zero_hops_is_identity_and_isolated_node_is_fixed() {
        let g = Graph::undirected(3, [(0, 1)], Some(vec![0, 0, 1]), 2).unwrap();
        let p = build_propagation_matrix(&g, Mode::Vanilla, 0.0, 0).unwrap();
        let h = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(propagate(h.view(), &p, 0).unwrap(), h);
        let one = propagate(h.view(), &p, 1).unwrap();
        assert_eq!(one.row(2), h.row(2));
        assert_abs_diff_eq!(one[[0, 0]], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one[[0, 1]], 3.0, epsilon = 1e-12);
        assert!(propagate(array![[1.0]].view(), &p, 1).is_err());
    }

    #[test]
    fn d_prime_cases() {
        assert_eq!(d_prime(3, &[3, 3, 3]).unwrap(), 3.0);
        assert_abs_diff_eq!(d_prime(1, &[3]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(d_prime(2, &[1]).is_err());
    }

    #[test]
    fn d_prime_matches_resummation() {
        let degs = [1usize, 5, 2, 9, 4, 4, 7];
        let direct: f64 = degs.iter().map(|&d| ((8.0) / (d as f64 + 1.0)).sqrt()).sum();
        assert_abs_diff_eq!(d_prime(7, &degs).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn coefficient_plug_ins() {
        assert_abs_diff_eq!(expected_coeff(Mode::Vanilla, 0.5, 0.3, 6, 6.0).unwrap(), 1.0 / 7.0);
        assert_abs_diff_eq!(expected_coeff(Mode::Signed, 0.2, 0.0, 6, 6.0).unwrap(), 1.0);
        assert_abs_diff_eq!(expected_coeff(Mode::Zero, 0.7, 0.0, 4, 4.0).unwrap(), 0.76, epsilon = 1e-15);
        for mode in Mode::ALL {
            let c = expected_coeff(mode, 1.0, 0.0, 5, 3.5).unwrap();
            assert_abs_diff_eq!(c, 4.5 / 6.0, epsilon = 1e-15);
        }
        assert!(expected_coeff(Mode::Zero, 1.2, 0.0, 1, 1.0).is_err());
    }

    #[test]
    fn multiclass_reduces_to_binary() {
        let k = array![1.3, -0.4];
        let kp = -&k;
        for &(b, e) in &[(0.0, 0.0), (0.3, 0.1), (0.8, 0.5), (1.0, 1.0)] {
            for mode in Mode::ALL {
                let v = expected_vector_multiclass(mode, b, e, k.view(), kp.view(), 5, 4.2).unwrap();
                let c = expected_coeff(mode, b, e, 5, 4.2).unwrap();
                assert_abs_diff_eq!(v, &k * c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_regime_without_errors_ignores_k_prime() {
        let k = array![1.0, 0.0];
        let a = expected_vector_multiclass(Mode::Zero, 0.4, 0.0, k.view(), array![0.0, 0.9].view(), 3, 3.0)
            .unwrap();
        let b = expected_vector_multiclass(Mode::Zero, 0.4, 0.0, k.view(), array![-0.5, 0.0].view(), 3, 3.0)
            .unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        assert_abs_diff_eq!(a, &k * ((0.4 * 3.0 + 1.0) / 4.0), epsilon = 1e-15);
    }

    #[test]
    fn multiclass_rejects_long_k_prime() {
        let r = expected_vector_multiclass(
            Mode::Signed,
            0.5,
            0.0,
            array![1.0, 0.0].view(),
            array![0.0, 1.5].view(),
            2,
            2.0,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn wrong_class_aggregate_of_polar_means() {
        let means = crate::synth::class_means(5, 2.0, 2).unwrap();
        let kp = aggregate_wrong_class_mean(means.view(), 0, None).unwrap();
        // the C means sum to zero, so the others average to -k/(C-1)
        assert_abs_diff_eq!(kp, means.row(0).to_owned() * (-0.25), epsilon = 1e-12);
        let two = crate::synth::class_means(2, 1.0, 2).unwrap();
        assert_abs_diff_eq!(
            aggregate_wrong_class_mean(two.view(), 1, None).unwrap(),
            two.row(0).to_owned(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn z_plug_ins_and_case_identities() {
        assert_eq!(z_binary(0.0, 0.0), 1.0);
        assert_eq!(z_binary(0.5, 0.5), 0.0);
        for i in 0..=10 {
            for j in 0..=10 {
                let (e, b) = (i as f64 / 10.0, j as f64 / 10.0);
                assert_abs_diff_eq!(ZCase::MultiOpposite.eval(e, b), z_binary(e, b), epsilon = 1e-15);
                assert_abs_diff_eq!(
                    ZCase::MultiSame.eval(e, b),
                    -2.0 * e * b - (1.0 - e - b),
                    epsilon = 1e-15
                );
            }
        }
    }

    /// Closed-form antiderivatives evaluated at the corners.
    fn exact_integral(case: ZCase) -> f64 {
        match case {
            // ∫∫ 1 - e - b = 1 - 1/2 - 1/2
            ZCase::Binary | ZCase::MultiOpposite => 0.0,
            // ∫∫ -2eb + e + b - 1 = -1/2 + 1/2 + 1/2 - 1
            ZCase::MultiSame => -0.5,
        }
    }

    #[test]
    fn surface_quadrature_matches_antiderivative() {
        for case in ZCase::ALL {
            let mid = z_integral_midpoint(case, 1000).unwrap();
            assert_abs_diff_eq!(mid, exact_integral(case), epsilon = 1e-9);
            let trap = z_surface(case, 101).unwrap().integral();
            assert_abs_diff_eq!(trap, exact_integral(case), epsilon = 1e-12);
        }
    }

    #[test]
    fn surface_corners_symmetry_and_csv() {
        let s = z_surface(ZCase::Binary, 5).unwrap();
        assert_eq!(s.values[[0, 0]], 1.0);
        assert_eq!(s.values[[4, 4]], -1.0);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s.values[[i, j]], s.values[[j, i]]);
            }
        }
        let csv = s.to_csv();
        assert!(csv.starts_with("e,b,Z\n0,0,1\n"));
        assert_eq!(csv.lines().count(), 26);
        assert!(z_surface(ZCase::Binary, 1).is_err());
        assert!("nonsense".parse::<ZCase>().is_err());
        assert_eq!("multi_k'_eq_k".parse::<ZCase>().unwrap(), ZCase::MultiSame);
    }

    #[test]
    fn path_signs() {
        assert_eq!(path_sign(&[0, 1, 2]).unwrap(), 1);
        assert_eq!(path_sign(&[0, 0, 0]).unwrap(), 1);
        assert_eq!(path_sign(&[0, 0, 1]).unwrap(), -1);
        assert_eq!(path_sign(&[0, 1, 0]).unwrap(), 1);
        assert!(path_sign(&[3]).is_err());
    }

    #[test]
    fn path_sign_matches_operator_signs() {
        let labels = vec![0, 1, 2, 2, 0, 1];
        let pairs: Vec<_> = (0..5).map(|i| (i, i + 1)).collect();
        let g = Graph::undirected(6, pairs, Some(labels.clone()), 3).unwrap();
        let p = build_propagation_matrix(&g, Mode::Signed, 0.0, 9).unwrap();
        for start in 0..5 {
            for end in start + 1..6 {
                let product: f64 = (start..end).map(|i| p.weight(i, i + 1)).product();
                let sign = path_sign(&labels[start..=end]).unwrap();
                assert_eq!(product.signum() as i8, sign);
            }
        }
    }

    /// Dense `A^l` by naive multiplication.
    fn dense_cost(g: &Graph, max_len: usize) -> u64 {
        let n = g.num_nodes();
        let mut a = vec![vec![0u64; n]; n];
        for i in 0..n {
            for &j in g.neighbors(i) {
                a[i][j] = 1;
            }
        }
        let mut power = a.clone();
        let mut total = 0;
        for len in 2..=max_len {
            let mut next = vec![vec![0u64; n]; n];
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        next[i][j] += power[i][k] * a[k][j];
                    }
                }
            }
            power = next;
            let _ = len;
            for i in 0..n {
                for j in i..n {
                    total += power[i][j];
                }
            }
        }
        total
    }

    #[test]
    fn path_cost_small_graphs() {
        let tri = Graph::undirected(3, [(0, 1), (1, 2), (0, 2)], None, 1).unwrap();
        assert_eq!(dense_cost(&tri, 2), 9);
        assert_eq!(path_enumeration_cost(&tri, 2).unwrap().count, 9);

        let path = Graph::undirected(3, [(0, 1), (1, 2)], None, 1).unwrap();
        assert_eq!(dense_cost(&path, 2), 5);
        assert_eq!(path_enumeration_cost(&path, 2).unwrap().count, 5);

        let empty = Graph::undirected(4, [], None, 1).unwrap();
        assert_eq!(path_enumeration_cost(&empty, 5).unwrap(), PathCount { count: 0, saturated: false });
        assert!(path_enumeration_cost(&tri, 1).is_err());
    }

    #[test]
    fn path_cost_matches_dense_oracle_on_random_graph() {
        let cfg = crate::synth::SynthConfig {
            n: 24,
            num_classes: 3,
            degree: 3,
            symmetrize: true,
            seed: 4,
            ..Default::default()
        };
        let g = crate::synth::generate_graph(&cfg).unwrap();
        for len in 2..=4 {
            assert_eq!(path_enumeration_cost(&g, len).unwrap().count, dense_cost(&g, len));
        }
    }

    #[test]
    fn path_cost_saturates() {
        let n = 40;
        let pairs: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let complete = Graph::undirected(n, pairs, None, 1).unwrap();
        let r = path_enumeration_cost(&complete, 30).unwrap();
        assert!(r.saturated);
        assert_eq!(r.count, u64::MAX);
    }
}

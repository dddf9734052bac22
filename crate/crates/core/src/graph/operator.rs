use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// How heterophilous edges are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Vanilla,
    Signed,
    Zero,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Vanilla, Mode::Signed, Mode::Zero];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::Signed => "signed",
            Mode::Zero => "zero",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Mode::Vanilla),
            "signed" => Ok(Mode::Signed),
            "zero" => Ok(Mode::Zero),
            other => Err(Error::domain(format!("unknown regime {other:?}"))),
        }
    }
}

/// Symmetrically normalised propagation operator with self-loops, stored as
/// CSR. Explicit zero weights are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    n: usize,
    mode: Mode,
    error_rate: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Builds the GCN operator `D̃^{-1/2} S∘Ã D̃^{-1/2}` for the requested mode.
///
/// Off-diagonal magnitude is `1/√((d_i+1)(d_j+1))`, the self-loop is always
/// `+1/(d_i+1)`. For signed and zero modes each stored edge gets one
/// Bernoulli(`e`) error draw: an error inverts the label-derived decision
/// (sign for `Signed`, keep/drop for `Zero`). An undirected pair shares its
/// draw between both directions.
pub fn build_propagation_matrix(
    g: &Graph,
    mode: Mode,
    error_rate: f64,
    seed: u64,
) -> Result<PropagationMatrix> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::domain(format!("error rate {error_rate} outside [0, 1]")));
    }
    let labels = match mode {
        Mode::Vanilla => None,
        _ => Some(g.require_labels()?),
    };
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();

    let mut rng = rng_from_seed(seed);
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| vec![(i, inv_sqrt[i] * inv_sqrt[i])])
        .collect();
    for &(i, j) in g.edges() {
        let magnitude = inv_sqrt[i] * inv_sqrt[j];
        let weight = match labels {
            None => magnitude,
            Some(labels) => {
                let homophilous = labels[i] == labels[j];
                let wrong = rng.random_bool(error_rate);
                match mode {
                    Mode::Signed => {
                        if homophilous != wrong {
                            magnitude
                        } else {
                            -magnitude
                        }
                    }
                    Mode::Zero => {
                        if homophilous != wrong {
                            magnitude
                        } else {
                            0.0
                        }
                    }
                    Mode::Vanilla => unreachable!(),
                }
            }
        };
        if weight != 0.0 {
            rows[i].push((j, weight));
            if !g.is_directed() {
                rows[j].push((i, weight));
            }
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_unstable_by_key(|&(j, _)| j);
        for (j, w) in row {
            cols.push(j);
            vals.push(w);
        }
        row_ptr.push(cols.len());
    }
    Ok(PropagationMatrix {
        n,
        mode,
        error_rate,
        row_ptr,
        cols,
        vals,
    })
}

impl PropagationMatrix {
    /// The identity operator (every node isolated).
    pub fn identity(n: usize) -> Self {
        PropagationMatrix {
            n,
            mode: Mode::Vanilla,
            error_rate: 0.0,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn error_rate(&self) -> f64 {
        self.error_rate
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// Stored entry `(i, j)`, or 0.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    /// `P · H`.
    pub fn apply(&self, h: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if h.nrows() != self.n {
            return Err(Error::domain(format!(
                "operator has {} rows, features have {}",
                self.n,
                h.nrows()
            )));
        }
        let mut out = Array2::zeros((self.n, h.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (j, w) in self.row(i) {
                out_row.scaled_add(w, &h.row(j));
            }
        }
        Ok(out)
    }

    /// `Pᵀ · H`.
    pub fn apply_transpose(&self, h: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if h.nrows() != self.n {
            return Err(Error::domain(format!(
                "operator has {} rows, features have {}",
                self.n,
                h.nrows()
            )));
        }
        let mut out = Array2::zeros((self.n, h.ncols()));
        for i in 0..self.n {
            let src = h.row(i);
            for (j, w) in self.row(i) {
                out.row_mut(j).scaled_add(w, &src);
            }
        }
        Ok(out)
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n, self.n));
        for (i, j, w) in self.entries() {
            dense[[i, j]] = w;
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path(labels: [usize; 2]) -> Graph {
        Graph::undirected(2, [(0, 1)], Some(labels.to_vec()), 2).unwrap()
    }

    #[test]
    fn path_plug_in() {
        let p = build_propagation_matrix(&path([0, 0]), Mode::Signed, 0.0, 1).unwrap();
        assert_abs_diff_eq!(p.weight(0, 0), 0.5);
        assert_abs_diff_eq!(p.weight(0, 1), 0.5);

        let p = build_propagation_matrix(&path([0, 1]), Mode::Signed, 0.0, 1).unwrap();
        assert_abs_diff_eq!(p.weight(0, 1), -0.5);
        assert_abs_diff_eq!(p.weight(1, 0), -0.5);

        let p = build_propagation_matrix(&path([0, 1]), Mode::Zero, 0.0, 1).unwrap();
        assert_eq!(p.weight(0, 1), 0.0);
        assert_eq!(p.nnz(), 2);
    }

    #[test]
    fn full_error_negates_signs() {
        let g = Graph::undirected(
            5,
            [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)],
            Some(vec![0, 1, 1, 2, 0]),
            3,
        )
        .unwrap();
        let clean = build_propagation_matrix(&g, Mode::Signed, 0.0, 3).unwrap();
        let flipped = build_propagation_matrix(&g, Mode::Signed, 1.0, 3).unwrap();
        for (i, j, w) in clean.entries() {
            if i == j {
                assert_eq!(flipped.weight(i, j), w);
            } else {
                assert_eq!(flipped.weight(i, j), -w);
            }
        }
    }

    #[test]
    fn vanilla_needs_no_labels_but_others_do() {
        let g = Graph::undirected(2, [(0, 1)], None, 1).unwrap();
        assert!(build_propagation_matrix(&g, Mode::Vanilla, 0.0, 0).is_ok());
        assert!(matches!(
            build_propagation_matrix(&g, Mode::Signed, 0.0, 0),
            Err(Error::Domain(_))
        ));
        assert!(build_propagation_matrix(&path([0, 0]), Mode::Zero, 1.5, 0).is_err());
    }

    #[test]
    fn transpose_matches_dense() {
        let g = Graph::directed(vec![vec![1, 2], vec![2], vec![0]], Some(vec![0, 1, 0]), 2).unwrap();
        let p = build_propagation_matrix(&g, Mode::Signed, 0.0, 0).unwrap();
        let h = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64 + 0.5);
        let dense = p.to_dense();
        let expect = dense.t().dot(&h);
        assert_abs_diff_eq!(p.apply_transpose(h.view()).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(p.apply(h.view()).unwrap(), dense.dot(&h), epsilon = 1e-12);
    }

    #[test]
    fn mode_round_trips_through_str() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("bogus".parse::<Mode>().is_err());
    }
}

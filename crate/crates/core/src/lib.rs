//! Numerical laboratory for signed message passing on multi-class graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: graph structure, homophily ratios and the three propagation
//!   operators (vanilla, signed, zero-weight).
//! - [`synth`]: synthetic labelled graphs with polar class means.
//! - [`propagate`]: linear propagation, closed-form one-hop expectations,
//!   discrimination gaps and the Monte Carlo checks that tie them together.
//! - [`uncertainty`]: entropy, dissonance and the one-step update model.
//! - [`nn`]: a two-layer GCN with hand-written gradients, Adam and the
//!   calibrated training loop.
//! - [`data`]: on-disk dataset bundles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod graph;
pub mod nn;
pub mod propagate;
pub mod rng;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
pub use graph::{Graph, Mode, PropagationMatrix};

/// Dense row-major node feature matrix (`n × F`).
pub type FeatureMatrix = ndarray::Array2<f64>;

/// Row-stochastic prediction matrix (`n × C`).
pub type ProbabilityMatrix = ndarray::Array2<f64>;

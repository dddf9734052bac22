//! Shared machinery for the training-based commands.
//!
//! Repetition `r` draws everything from `rep_seed = derive_seed(cfg.seed, r)`:
//! synthetic data, the split, the operator's sign draws and the model
//! initialisation each use their own sub-stream. The seeds do not depend on
//! the regime or on λ, so runs that differ only in those compare like with like.

use hetsign_core::data::{load_bundle, DatasetBundle};
use hetsign_core::graph::{build_propagation_matrix, Graph, Mode};
use hetsign_core::nn::{make_split, train, TrainConfig};
use hetsign_core::rng::derive_seed;
use hetsign_core::synth::{generate, SynthConfig};
use hetsign_core::{FeatureMatrix, Result};
use ndarray::Axis;

use crate::config::ExperimentConfig;

const DATA_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const SIGN_STREAM: u64 = 2;
const MODEL_STREAM: u64 = 3;

pub fn rep_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

/// Graph source: a bundle loaded once, or a synthetic generator reseeded per repetition.
pub enum Source {
    Bundle(DatasetBundle),
    Synthetic(SynthConfig),
}

impl Source {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.dataset {
            Some(path) => Source::Bundle(load_bundle(path)?),
            None => Source::Synthetic(cfg.synth.clone()),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Source::Bundle(b) => b.name.clone(),
            Source::Synthetic(s) => format!("synthetic(C={}, b={}, d={})", s.num_classes, s.homophily, s.degree),
        }
    }

    pub fn draw(&self, rep_seed: u64) -> Result<(Graph, FeatureMatrix)> {
        match self {
            Source::Bundle(b) => Ok((b.graph.clone(), b.features.clone())),
            Source::Synthetic(s) => generate(&SynthConfig {
                seed: derive_seed(rep_seed, DATA_STREAM),
                ..s.clone()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rep: usize,
    pub mode: Mode,
    pub lambda: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub mean_dissonance: f64,
    pub best_epoch: usize,
}

/// Trains one GCN and reports the checkpointed epoch.
pub fn train_run(
    g: &Graph,
    x: &FeatureMatrix,
    mode: Mode,
    lambda: f64,
    rep: usize,
    rep_seed: u64,
    cfg: &ExperimentConfig,
) -> Result<RunResult> {
    let labels = g.labels().ok_or_else(|| hetsign_core::Error::Validation("graph is unlabelled".into()))?;
    let split = make_split(labels, g.num_classes(), cfg.per_class, derive_seed(rep_seed, SPLIT_STREAM))?;
    let p = build_propagation_matrix(g, mode, cfg.error_rate, derive_seed(rep_seed, SIGN_STREAM))?;
    let tc = TrainConfig {
        lambda,
        seed: derive_seed(rep_seed, MODEL_STREAM),
        ..cfg.train.clone()
    };
    let outcome = train(x.view(), &p, labels, g.num_classes(), &split, &tc)?;
    let best = outcome.best_record();
    Ok(RunResult {
        rep,
        mode,
        lambda,
        val_acc: best.val_acc,
        test_acc: best.test_acc,
        mean_dissonance: best.mean_dissonance,
        best_epoch: best.epoch,
    })
}

/// Restricts a graph and its features to the nodes with label below `classes`.
pub fn drop_classes_above(g: &Graph, x: &FeatureMatrix, classes: usize) -> Result<(Graph, FeatureMatrix)> {
    let labels = g.labels().ok_or_else(|| hetsign_core::Error::Validation("graph is unlabelled".into()))?;
    let keep: Vec<usize> = (0..g.num_nodes()).filter(|&i| labels[i] < classes).collect();
    let sub = g.induced(&keep, Some(classes))?;
    Ok((sub, x.select(Axis(0), &keep)))
}

use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{accuracy, calib_loss, nll_loss, total_loss};
use super::model::{backward, dropout_mask, gcn_forward};
use super::{AdamState, GcnParams, Split, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::PropagationMatrix;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::uncertainty::mean_dissonance;

/// Metrics of one epoch. Losses come from the training-mode forward pass;
/// accuracies and dissonance from the updated parameters without dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_gnn: f64,
    pub loss_calib: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Mean dissonance over the test nodes.
    pub mean_dissonance: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: GcnParams,
    pub best_val_acc: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    /// Record of the checkpointed epoch.
    pub fn best_record(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

/// Probabilities of `params` with dropout disabled.
pub fn evaluate(x: ArrayView2<'_, f64>, p: &PropagationMatrix, params: &GcnParams) -> Result<Array2<f64>> {
    Ok(gcn_forward(x, p, params, None)?.probs)
}

/// Best-validation training loop with an exposed single-epoch step.
pub struct Trainer<'a> {
    x: ArrayView2<'a, f64>,
    p: &'a PropagationMatrix,
    labels: &'a [usize],
    split: &'a Split,
    calib_nodes: Vec<usize>,
    cfg: TrainConfig,
    params: GcnParams,
    adam: AdamState,
    dropout_rng: ChaCha8Rng,
    epoch: usize,
    best: Option<(f64, usize, GcnParams)>,
    history: Vec<EpochRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        x: ArrayView2<'a, f64>,
        p: &'a PropagationMatrix,
        labels: &'a [usize],
        num_classes: usize,
        split: &'a Split,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if x.nrows() != p.num_nodes() || labels.len() != x.nrows() {
            return Err(Error::domain("features, operator and labels disagree on n"));
        }
        if split.train.is_empty() {
            return Err(Error::domain("empty training set"));
        }
        let params = GcnParams::glorot(x.ncols(), cfg.hidden, num_classes, cfg.seed)?;
        let adam = AdamState::new(&params);
        Ok(Trainer {
            x,
            p,
            labels,
            split,
            calib_nodes: split.unlabeled(),
            cfg: cfg.clone(),
            params,
            adam,
            dropout_rng: rng_from_seed(derive_seed(cfg.seed, stream::DROPOUT)),
            epoch: 0,
            best: None,
            history: Vec::new(),
        })
    }

    pub fn params(&self) -> &GcnParams {
        &self.params
    }

    /// Current probabilities without dropout.
    pub fn predict(&self) -> Result<Array2<f64>> {
        evaluate(self.x, self.p, &self.params)
    }

    /// One forward / backward / update / evaluate cycle.
    pub fn step(&mut self) -> Result<&EpochRecord> {
        self.epoch += 1;
        let epoch = self.epoch;
        let diverged = |msg: String| Error::Training { epoch, msg };

        let mask = (self.cfg.dropout > 0.0).then(|| {
            dropout_mask(self.x.nrows(), self.cfg.hidden, self.cfg.dropout, &mut self.dropout_rng)
        });
        let pass = gcn_forward(self.x, self.p, &self.params, mask).map_err(|e| diverged(e.to_string()))?;
        let loss_gnn = nll_loss(pass.log_probs.view(), self.labels, &self.split.train)?;
        let loss_calib = if self.calib_nodes.is_empty() {
            0.0
        } else {
            calib_loss(pass.probs.view(), &self.calib_nodes)?
        };
        let total = total_loss(loss_gnn, loss_calib, self.cfg.lambda)?;
        if !total.is_finite() {
            return Err(diverged(format!("total loss {total}")));
        }
        let grads = backward(
            &pass,
            self.x,
            self.p,
            &self.params,
            self.labels,
            &self.split.train,
            &self.calib_nodes,
            self.cfg.lambda,
        )?;
        self.adam.step(&mut self.params, &grads, self.cfg.lr, self.cfg.weight_decay);
        if !self.params.is_finite() {
            return Err(diverged("non-finite parameters".into()));
        }

        let probs = self.predict().map_err(|e| diverged(e.to_string()))?;
        let val_acc = accuracy(probs.view(), self.labels, &self.split.val);
        let test_acc = accuracy(probs.view(), self.labels, &self.split.test);
        let mean_dissonance = if self.split.test.is_empty() {
            0.0
        } else {
            mean_dissonance(probs.view(), &self.split.test)?
        };
        // first epoch always checkpoints, later ones only on strict improvement
        let improved = self.best.as_ref().is_none_or(|(best, _, _)| val_acc > *best);
        if improved {
            self.best = Some((val_acc, epoch, self.params.clone()));
        }
        self.history.push(EpochRecord {
            epoch,
            loss_gnn,
            loss_calib,
            val_acc,
            test_acc,
            mean_dissonance,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    pub fn finish(self) -> TrainOutcome {
        let (best_val_acc, best_epoch, best_params) =
            self.best.unwrap_or((0.0, 0, self.params.clone()));
        TrainOutcome {
            best_params,
            best_val_acc,
            best_epoch,
            history: self.history,
        }
    }
}

/// Runs `cfg.epochs` epochs and returns the best-validation checkpoint.
pub fn train(
    x: ArrayView2<'_, f64>,
    p: &PropagationMatrix,
    labels: &[usize],
    num_classes: usize,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(x, p, labels, num_classes, split, cfg)?;
    for _ in 0..cfg.epochs {
        trainer.step()?;
    }
    Ok(trainer.finish())
}

use std::path::{Path, PathBuf};

use hetsign_core::graph::Mode;
use hetsign_core::nn::TrainConfig;
use hetsign_core::propagate::montecarlo::{LatticePoint, McConfig};
use hetsign_core::synth::SynthConfig;
use hetsign_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// One JSON document configures every command; each command reads the
/// fields it needs and ignores the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundle directory. When absent, graphs come from `synth`.
    pub dataset: Option<PathBuf>,
    pub synth: SynthConfig,
    pub regimes: Vec<Mode>,
    /// Sign / keep error ratio used when building operators.
    pub error_rate: f64,
    pub lambdas: Vec<f64>,
    /// Depths `0..=max_layers` for the dissonance sweep.
    pub max_layers: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Training nodes per class.
    pub per_class: usize,
    pub train: TrainConfig,
    /// Grid points per axis for Z surfaces.
    pub resolution: usize,
    pub monte_carlo: McConfig,
    /// Lattice for the Monte Carlo checks; the full default lattice when absent.
    pub lattice: Option<Vec<LatticePoint>>,
    /// Also write SVG plots next to the CSV reports.
    pub svg: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            synth: SynthConfig {
                homophily: 0.2,
                symmetrize: true,
                ..SynthConfig::default()
            },
            regimes: Mode::ALL.to_vec(),
            error_rate: 0.0,
            lambdas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            max_layers: 8,
            repetitions: 10,
            seed: 0,
            per_class: 20,
            train: TrainConfig::default(),
            resolution: 101,
            monte_carlo: McConfig::default(),
            lattice: None,
            svg: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.regimes.is_empty() {
            return bad("regimes must not be empty".into());
        }
        if self.lambdas.is_empty() {
            return bad("lambda grid must not be empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return bad(format!("lambda {l} outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad(format!("error_rate {} outside [0, 1]", self.error_rate));
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2".into());
        }
        if self.monte_carlo.trials < 2 || self.monte_carlo.nodes == 0 {
            return bad("monte_carlo needs at least 2 trials and 1 node".into());
        }
        self.train.validate().map_err(|e| Error::Validation(e.to_string()))?;
        if self.dataset.is_none() {
            self.synth.validate().map_err(|e| Error::Validation(e.to_string()))?;
        }
        Ok(())
    }
}

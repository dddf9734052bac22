use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Validation ∪ test, the nodes whose predictions the calibration term sees.
    pub fn unlabeled(&self) -> Vec<usize> {
        let mut v = self.val.clone();
        v.extend_from_slice(&self.test);
        v.sort_unstable();
        v
    }
}

/// `per_class` random training nodes from every class; the rest is shuffled
/// and halved into validation and test, the odd node going to test.
pub fn make_split(labels: &[usize], num_classes: usize, per_class: usize, seed: u64) -> Result<Split> {
    let mut rng = rng_from_seed(seed);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::domain(format!("label {y} not below {num_classes}")));
        }
        by_class[y].push(i);
    }
    let mut train = Vec::with_capacity(per_class * num_classes);
    let mut rest = Vec::with_capacity(labels.len());
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if nodes.len() < per_class {
            return Err(Error::domain(format!(
                "class {c} has {} nodes, fewer than {per_class}",
                nodes.len()
            )));
        }
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..per_class]);
        rest.extend_from_slice(&nodes[per_class..]);
    }
    rest.shuffle(&mut rng);
    let n_val = rest.len() / 2;
    let mut val = rest[..n_val].to_vec();
    let mut test = rest[n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

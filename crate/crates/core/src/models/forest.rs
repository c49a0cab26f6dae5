//! Bagged CART ensemble with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{argmax_counts, grow, MaxFeatures, TreeNode, TreeParams};
use super::{check_training_data, seeded_rng, Classifier, ModelError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub base_seed: u64,
    /// Draw an n-sized bootstrap per tree. Disabling it is meant for tests.
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            base_seed: 42,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub trees: Vec<TreeNode<T>>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: ForestParams,
}

impl<T: Scalar> ForestModel<T> {
    /// Per-tree votes for `row`.
    pub fn votes(&self, row: &[T]) -> Vec<usize> {
        let mut v = vec![0; self.n_classes];
        for t in &self.trees {
            v[t.predict(row)] += 1;
        }
        v
    }
}

impl<T: Scalar> Classifier<T> for ForestModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Majority vote; ties go to the lowest class index.
    fn predict_row(&self, row: &[T]) -> usize {
        argmax_counts(&self.votes(row))
    }
}

/// Trains `n_estimators` trees. Tree `t` draws from the RNG stream `(base_seed, t)`,
/// so the result does not depend on how many threads run the loop.
pub fn train_random_forest<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel<T>, ModelError> {
    check_training_data(x, y, n_classes)?;
    if params.n_estimators == 0 {
        return Err(ModelError::InvalidParameter("n_estimators must be >= 1".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        max_features: params.max_features,
        seed: params.base_seed,
    };
    let n = x.rows();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded_rng(params.base_seed, t as u64);
            let mut idx: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            grow(x, y, n_classes, &mut idx, &tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, n_features: x.cols(), n_classes, params: params.clone() })
}

//! Brute-force Euclidean k-nearest-neighbour classifier.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_training_data, Classifier, ModelError};
use crate::linalg::{squared_distance, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<T> {
    pub x: Matrix<T>,
    pub y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

pub fn train_knn<T: Scalar>(x: &Matrix<T>, y: &[usize], n_classes: usize, k: usize) -> Result<KnnModel<T>, ModelError> {
    check_training_data(x, y, n_classes)?;
    if k == 0 || k > x.rows() {
        return Err(ModelError::InvalidParameter(format!("k = {k} must be in 1..={}", x.rows())));
    }
    Ok(KnnModel { x: x.clone(), y: y.to_vec(), k, n_classes })
}

impl<T: Scalar> KnnModel<T> {
    /// The `k` nearest training rows as `(row, distance)`, nearest first;
    /// equal distances keep the lower row index first.
    pub fn neighbours(&self, query: &[T]) -> Vec<(usize, T)> {
        let mut d: Vec<(usize, T)> =
            self.x.iter_rows().enumerate().map(|(i, r)| (i, squared_distance(r, query))).collect();
        d.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        d.truncate(self.k);
        d.into_iter().map(|(i, s)| (i, s.sqrt())).collect()
    }
}

impl<T: Scalar> Classifier<T> for KnnModel<T> {
    fn n_features(&self) -> usize {
        self.x.cols()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Majority vote; ties go to the smaller summed distance, then the lower class.
    fn predict_row(&self, row: &[T]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        let mut dist = vec![T::zero(); self.n_classes];
        for (i, d) in self.neighbours(row) {
            votes[self.y[i]] += 1;
            dist[self.y[i]] += d;
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}

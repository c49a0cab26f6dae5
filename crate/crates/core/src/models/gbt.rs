//! Second-order gradient boosting with a softmax objective.
//!
//! Each round fits one regression tree per class to the softmax gradients
//! `g = p - y` and hessians `h = p (1 - p)`. Leaves carry `-eta * G / (H + lambda)`
//! and a split is taken when
//! `0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda))` is positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::midpoint;
use super::{check_training_data, Classifier, ModelError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub l2_lambda: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { rounds: 100, learning_rate: 0.3, max_depth: 6, l2_lambda: 1.0, min_child_weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegNode<T> {
    Split { feature: usize, threshold: T, left: Box<RegNode<T>>, right: Box<RegNode<T>> },
    Leaf { weight: T },
}

impl<T: Scalar> RegNode<T> {
    pub fn value(&self, row: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                RegNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
                RegNode::Leaf { weight } => return *weight,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel<T> {
    /// `ensembles[class][round]`.
    pub ensembles: Vec<Vec<RegNode<T>>>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: GbtParams,
}

impl<T: Scalar> GbtModel<T> {
    pub fn rounds(&self) -> usize {
        self.ensembles.first().map_or(0, Vec::len)
    }

    /// Raw per-class scores using only the first `rounds` boosting rounds.
    pub fn scores_upto(&self, row: &[T], rounds: usize) -> Vec<T> {
        self.ensembles.iter().map(|e| e.iter().take(rounds).map(|t| t.value(row)).sum()).collect()
    }

    pub fn predict_proba_row(&self, row: &[T]) -> Vec<T> {
        softmax(&self.scores_upto(row, usize::MAX))
    }

    /// Mean softmax cross-entropy of the first `rounds` rounds on `(x, y)`.
    pub fn loss_upto(&self, x: &Matrix<T>, y: &[usize], rounds: usize) -> T {
        let n = T::from_usize_lossy(x.rows().max(1));
        let tiny = T::min_positive_value();
        x.iter_rows()
            .zip(y)
            .map(|(r, &c)| -softmax(&self.scores_upto(r, rounds))[c].max(tiny).ln())
            .sum::<T>()
            / n
    }
}

impl<T: Scalar> Classifier<T> for GbtModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_row(&self, row: &[T]) -> usize {
        let p = self.predict_proba_row(row);
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        best
    }
}

pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}

struct RegBuilder<'a, T> {
    x: &'a Matrix<T>,
    grad: &'a [T],
    hess: &'a [T],
    lambda: T,
    eta: T,
    min_child_weight: T,
    max_depth: usize,
}

impl<T: Scalar> RegBuilder<'_, T> {
    fn score(&self, g: T, h: T) -> T {
        g * g / (h + self.lambda)
    }

    fn build(&self, idx: &mut [usize], depth: usize) -> RegNode<T> {
        let g: T = idx.iter().map(|&i| self.grad[i]).sum();
        let h: T = idx.iter().map(|&i| self.hess[i]).sum();
        let leaf = || RegNode::Leaf { weight: -self.eta * g / (h + self.lambda) };
        if depth >= self.max_depth || idx.len() < 2 {
            return leaf();
        }
        let parent = self.score(g, h);
        let half = T::lit(0.5);
        let mut best: Option<(usize, T, T)> = None;
        let mut pairs: Vec<(T, usize)> = Vec::with_capacity(idx.len());
        for f in 0..self.x.cols() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), i)));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let (mut gl, mut hl) = (T::zero(), T::zero());
            for p in 1..pairs.len() {
                let (v_prev, i_prev) = pairs[p - 1];
                gl += self.grad[i_prev];
                hl += self.hess[i_prev];
                let v = pairs[p].0;
                if !(v_prev < v) {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.min_child_weight || hr < self.min_child_weight {
                    continue;
                }
                let gain = half * (self.score(gl, hl) + self.score(gr, hr) - parent);
                if gain > T::epsilon() && best.is_none_or(|b| gain > b.2) {
                    best = Some((f, midpoint(v_prev, v), gain));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return leaf();
        };
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        RegNode::Split {
            feature,
            threshold,
            left: Box::new(self.build(&mut left, depth + 1)),
            right: Box::new(self.build(&mut right, depth + 1)),
        }
    }
}

pub fn train_gbt<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &GbtParams,
) -> Result<GbtModel<T>, ModelError> {
    check_training_data(x, y, n_classes)?;
    if !(params.learning_rate > 0.0) || params.l2_lambda < 0.0 || params.min_child_weight < 0.0 {
        return Err(ModelError::InvalidParameter("learning_rate must be > 0; lambda and min_child_weight >= 0".into()));
    }
    let n = x.rows();
    let k = n_classes;
    let mut scores = vec![T::zero(); n * k];
    let mut ensembles: Vec<Vec<RegNode<T>>> = vec![Vec::with_capacity(params.rounds); k];
    let hess_floor = T::lit(1e-16);
    for _round in 0..params.rounds {
        let probs: Vec<Vec<T>> = scores.chunks_exact(k).map(softmax).collect();
        let trees: Vec<RegNode<T>> = (0..k)
            .into_par_iter()
            .map(|c| {
                let grad: Vec<T> =
                    (0..n).map(|i| probs[i][c] - if y[i] == c { T::one() } else { T::zero() }).collect();
                let hess: Vec<T> = (0..n).map(|i| (probs[i][c] * (T::one() - probs[i][c])).max(hess_floor)).collect();
                let builder = RegBuilder {
                    x,
                    grad: &grad,
                    hess: &hess,
                    lambda: T::lit(params.l2_lambda),
                    eta: T::lit(params.learning_rate),
                    min_child_weight: T::lit(params.min_child_weight),
                    max_depth: params.max_depth,
                };
                let mut idx: Vec<usize> = (0..n).collect();
                builder.build(&mut idx, 0)
            })
            .collect();
        for (c, tree) in trees.into_iter().enumerate() {
            for i in 0..n {
                scores[i * k + c] += tree.value(x.row(i));
            }
            ensembles[c].push(tree);
        }
    }
    Ok(GbtModel { ensembles, n_features: x.cols(), n_classes: k, params: params.clone() })
}

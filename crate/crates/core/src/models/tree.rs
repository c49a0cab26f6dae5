//! CART classification trees grown with exact greedy Gini splits.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, Classifier, ModelError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `1 - sum(p_c^2)` over the class counts of a node.
pub fn gini<T: Scalar>(counts: &[usize]) -> Result<T, ModelError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(ModelError::EmptyNode);
    }
    Ok(gini_unchecked(counts, total))
}

#[inline]
fn gini_unchecked<T: Scalar>(counts: &[usize], total: usize) -> T {
    let n = T::from_usize_lossy(total);
    let sq: T = counts
        .iter()
        .map(|&c| {
            let p = T::from_usize_lossy(c) / n;
            p * p
        })
        .sum();
    T::one() - sq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        /// Training rows (with bootstrap multiplicity) that reached this node.
        n_samples: usize,
        /// `gini(node) - weighted gini(children)`; always positive.
        impurity_decrease: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        class_counts: Vec<usize>,
        predicted: usize,
    },
}

impl<T: Scalar> TreeNode<T> {
    fn leaf(class_counts: Vec<usize>) -> Self {
        let predicted = argmax_counts(&class_counts);
        TreeNode::Leaf { class_counts, predicted }
    }

    /// Leaf reached by `row`; `x[feature] <= threshold` goes left.
    pub fn leaf_for(&self, row: &[T]) -> &TreeNode<T> {
        let mut node = self;
        while let TreeNode::Split { feature, threshold, left, right, .. } = node {
            node = if row[*feature] <= *threshold { left } else { right };
        }
        node
    }

    pub fn predict(&self, row: &[T]) -> usize {
        match self.leaf_for(row) {
            TreeNode::Leaf { predicted, .. } => *predicted,
            TreeNode::Split { .. } => unreachable!("leaf_for stops at leaves"),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } => *n_samples,
            TreeNode::Leaf { class_counts, .. } => class_counts.iter().sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
            TreeNode::Leaf { .. } => 1,
        }
    }

    /// Visits every split node as `(feature, threshold, n_samples, impurity_decrease)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, T, usize, T)) {
        if let TreeNode::Split { feature, threshold, n_samples, impurity_decrease, left, right } = self {
            f(*feature, *threshold, *n_samples, *impurity_decrease);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    /// Un-normalized Gini importance: sum of `decrease * n_node / n_root` per feature.
    pub fn raw_importances(&self, n_features: usize) -> Vec<T> {
        let root_n = T::from_usize_lossy(self.n_samples().max(1));
        let mut imp = vec![T::zero(); n_features];
        self.for_each_split(&mut |f, _, n, dec| imp[f] += dec * T::from_usize_lossy(n) / root_n);
        imp
    }
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(d))` features per split.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1)),
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, max_features: MaxFeatures::All, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    pub root: TreeNode<T>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl<T: Scalar> Classifier<T> for DecisionTree<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_row(&self, row: &[T]) -> usize {
        self.root.predict(row)
    }
}

pub fn train_decision_tree<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &TreeParams,
) -> Result<DecisionTree<T>, ModelError> {
    check_training_data(x, y, n_classes)?;
    let mut rng = super::seeded_rng(params.seed, 0);
    let mut idx: Vec<usize> = (0..x.rows()).collect();
    let root = grow(x, y, n_classes, &mut idx, params, &mut rng);
    Ok(DecisionTree { root, n_features: x.cols(), n_classes })
}

/// Grows a tree over `idx` (duplicates allowed, e.g. from a bootstrap).
pub(crate) fn grow<T: Scalar, R: Rng>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    idx: &mut [usize],
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode<T> {
    grow_node(x, y, n_classes, idx, 0, params, rng)
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

fn grow_node<T: Scalar, R: Rng>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    idx: &mut [usize],
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode<T> {
    let mut counts = vec![0usize; n_classes];
    for &i in idx.iter() {
        counts[y[i]] += 1;
    }
    let n = idx.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || n < params.min_samples_split.max(2) || params.max_depth.is_some_and(|m| depth >= m) {
        return TreeNode::leaf(counts);
    }
    let Some(best) = best_split(x, y, n_classes, idx, &counts, params, rng) else {
        return TreeNode::leaf(counts);
    };
    // stable partition: left rows first, original order kept on both sides
    let (mut left, mut right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| x.get(i, best.feature) <= best.threshold);
    let n_left = left.len();
    idx[..n_left].copy_from_slice(&left);
    idx[n_left..].copy_from_slice(&right);
    let l = grow_node(x, y, n_classes, &mut left, depth + 1, params, rng);
    let r = grow_node(x, y, n_classes, &mut right, depth + 1, params, rng);
    TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        n_samples: n,
        impurity_decrease: best.gain,
        left: Box::new(l),
        right: Box::new(r),
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
#[inline]
pub(crate) fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = (lo + hi) / T::lit(2.0);
    if m >= hi || m.is_infinite() {
        lo
    } else {
        m
    }
}

fn best_split<T: Scalar, R: Rng>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    idx: &[usize],
    counts: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Option<Candidate<T>> {
    let d = x.cols();
    let k = params.max_features.resolve(d);
    let features: Vec<usize> = if k >= d {
        (0..d).collect()
    } else {
        let mut f = index::sample(rng, d, k).into_vec();
        f.sort_unstable();
        f
    };
    let n = idx.len();
    let nf = T::from_usize_lossy(n);
    let parent = gini_unchecked::<T>(counts, n);
    let min_gain = T::epsilon();
    let mut best: Option<Candidate<T>> = None;
    let mut pairs: Vec<(T, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(counts);
        for p in 1..n {
            let (v_prev, lab) = pairs[p - 1];
            left[lab] += 1;
            right[lab] -= 1;
            let v = pairs[p].0;
            if !(v_prev < v) {
                continue;
            }
            let gl = gini_unchecked::<T>(&left, p);
            let gr = gini_unchecked::<T>(&right, n - p);
            let pl = T::from_usize_lossy(p) / nf;
            let gain = parent - pl * gl - (T::one() - pl) * gr;
            if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate { feature: f, threshold: midpoint(v_prev, v), gain });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini::<f64>(&[4, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(gini::<f64>(&[2, 2]).unwrap(), 0.5);
        assert_eq!(gini::<f64>(&[1, 1, 1, 1]).unwrap(), 0.75);
        assert!(matches!(gini::<f64>(&[0, 0]), Err(ModelError::EmptyNode)));
    }

    #[test]
    fn one_dimensional_split() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let t = train_decision_tree(&x, &[0, 0, 1, 1], 2, &TreeParams::default()).unwrap();
        match &t.root {
            TreeNode::Split { feature, threshold, left, right, .. } => {
                assert_eq!((*feature, *threshold), (0, 1.5));
                assert!(matches!(**left, TreeNode::Leaf { predicted: 0, .. }));
                assert!(matches!(**right, TreeNode::Leaf { predicted: 1, .. }));
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
    }

    #[test]
    fn single_label_is_single_leaf() {
        let x = Matrix::from_vec(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = train_decision_tree(&x, &[1, 1, 1], 3, &TreeParams::default()).unwrap();
        assert_eq!(t.root, TreeNode::Leaf { class_counts: vec![0, 3, 0], predicted: 1 });
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features separate perfectly
        let x = Matrix::from_vec(4, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let t = train_decision_tree(&x, &[0, 0, 1, 1], 2, &TreeParams::default()).unwrap();
        assert!(matches!(t.root, TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn max_depth_limits_growth() {
        let x = Matrix::from_vec(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let p = TreeParams { max_depth: Some(1), ..Default::default() };
        let t = train_decision_tree(&x, &[0, 1, 0, 1, 0, 1], 2, &p).unwrap();
        assert!(t.root.depth() <= 1);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}

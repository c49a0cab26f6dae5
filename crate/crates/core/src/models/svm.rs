//! RBF-kernel support vector classifier, one-vs-rest, trained by SMO.
//!
//! Each binary machine solves
//! `min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a_i <= C`, `Q_ij = y_i y_j k(x_i, x_j)`,
//! by pairwise updates of the maximal violating pair until the KKT gap drops
//! below `tol`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_data, Classifier, ModelError};
use crate::linalg::{squared_distance, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / (d * Var(X))` over every entry of the training matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    /// Iteration budget, in multiples of the training-set size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, gamma: Gamma::Scale, tol: 1e-3, max_passes: 200 }
    }
}

pub fn scale_gamma<T: Scalar>(x: &Matrix<T>) -> T {
    let vals = x.as_slice();
    if vals.is_empty() {
        return T::one();
    }
    let n = T::from_usize_lossy(vals.len());
    let mean = vals.iter().copied().sum::<T>() / n;
    let var = vals.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    if var > T::zero() {
        T::one() / (T::from_usize_lossy(x.cols()) * var)
    } else {
        T::one()
    }
}

#[inline]
pub fn rbf<T: Scalar>(a: &[T], b: &[T], gamma: T) -> T {
    (-gamma * squared_distance(a, b)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine<T> {
    pub support_vectors: Matrix<T>,
    /// Dual variables of the support vectors, in `(0, C]`.
    pub alphas: Vec<T>,
    /// Labels (+1 / -1) of the support vectors.
    pub signs: Vec<T>,
    pub bias: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> BinaryMachine<T> {
    pub fn decision(&self, row: &[T], gamma: T) -> T {
        self.support_vectors
            .iter_rows()
            .zip(self.alphas.iter().zip(&self.signs))
            .map(|(sv, (&a, &s))| a * s * rbf(sv, row, gamma))
            .sum::<T>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel<T> {
    pub machines: Vec<BinaryMachine<T>>,
    pub gamma: T,
    pub c: T,
    pub n_features: usize,
    pub n_classes: usize,
}

impl<T: Scalar> SvmModel<T> {
    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }

    pub fn decision_scores(&self, row: &[T]) -> Vec<T> {
        self.machines.iter().map(|m| m.decision(row, self.gamma)).collect()
    }
}

impl<T: Scalar> Classifier<T> for SvmModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_row(&self, row: &[T]) -> usize {
        let s = self.decision_scores(row);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        best
    }
}

/// Full solution of one binary problem, all `n` dual variables included.
#[derive(Debug, Clone)]
pub struct DualSolution<T> {
    pub alpha: Vec<T>,
    pub bias: T,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves the binary dual for labels `signs` (each +1 or -1) over a precomputed kernel.
pub fn smo_solve<T: Scalar>(kernel: &Matrix<T>, signs: &[T], c: T, tol: T, max_iter: usize) -> DualSolution<T> {
    let n = signs.len();
    let pos = signs.iter().filter(|&&s| s > T::zero()).count();
    if pos == 0 || pos == n {
        // one-sided problem: y'a = 0 forces a = 0; the score is the constant label
        return DualSolution { alpha: vec![T::zero(); n], bias: signs[0], converged: true, iterations: 0 };
    }
    let tau = T::lit(1e-12);
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let q = |i: usize, j: usize| signs[i] * signs[j] * kernel.get(i, j);
    let in_up = |a: T, y: T| (y > T::zero() && a < c) || (y < T::zero() && a > T::zero());
    let in_low = |a: T, y: T| (y > T::zero() && a > T::zero()) || (y < T::zero() && a < c);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut gmax = T::neg_infinity();
        let mut gmin = T::infinity();
        for t in 0..n {
            let v = -signs[t] * grad[t];
            if in_up(alpha[t], signs[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], signs[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        if signs[i] != signs[j] {
            let quad = (q(i, i) + q(j, j) + T::lit(2.0) * q(i, j)).max(tau);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - T::lit(2.0) * q(i, j)).max(tau);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let mut ub = T::infinity();
    let mut lb = T::neg_infinity();
    let mut free_sum = T::zero();
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = signs[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= T::zero();
        if at_upper {
            if signs[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if signs[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 { free_sum / T::from_usize_lossy(n_free) } else { (ub + lb) / T::lit(2.0) };
    DualSolution { alpha, bias: -rho, converged, iterations }
}

pub fn kernel_matrix<T: Scalar>(x: &Matrix<T>, gamma: T) -> Matrix<T> {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, T::one());
        for j in (i + 1)..n {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

pub fn train_svm_rbf<T: Scalar>(
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Result<SvmModel<T>, ModelError> {
    check_training_data(x, y, n_classes)?;
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(ModelError::InvalidParameter("C and tol must be > 0".into()));
    }
    let gamma = match params.gamma {
        Gamma::Scale => scale_gamma(x),
        Gamma::Value(g) if g > 0.0 => T::lit(g),
        Gamma::Value(g) => return Err(ModelError::InvalidParameter(format!("gamma {g} must be > 0"))),
    };
    let c = T::lit(params.c);
    let kernel = kernel_matrix(x, gamma);
    let max_iter = params.max_passes.saturating_mul(x.rows().max(1));
    let machines = (0..n_classes)
        .into_par_iter()
        .map(|class| {
            let signs: Vec<T> = y.iter().map(|&l| if l == class { T::one() } else { -T::one() }).collect();
            let sol = smo_solve(&kernel, &signs, c, T::lit(params.tol), max_iter);
            if !sol.converged {
                log::warn!("SVM machine for class {class} hit the iteration cap ({max_iter}) before convergence");
            }
            let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > T::zero()).collect();
            BinaryMachine {
                support_vectors: x.select_rows(&sv),
                alphas: sv.iter().map(|&i| sol.alpha[i]).collect(),
                signs: sv.iter().map(|&i| signs[i]).collect(),
                bias: sol.bias,
                converged: sol.converged,
                iterations: sol.iterations,
            }
        })
        .collect();
    Ok(SvmModel { machines, gamma, c, n_features: x.cols(), n_classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_scale_on_unit_variance() {
        // 80 columns, entries +-1 -> variance 1
        let data: Vec<f64> = (0..160).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = Matrix::from_vec(2, 80, data).unwrap();
        assert_eq!(scale_gamma(&x), 0.0125);
    }

    #[test]
    fn kernel_diagonal_is_one() {
        let x = Matrix::from_vec(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let k = kernel_matrix(&x, 0.3);
        assert_eq!(k.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn one_sided_problem_is_constant() {
        let x = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let m = train_svm_rbf(&x, &[0, 0, 0], 2, &SvmParams::default()).unwrap();
        assert!(m.machines.iter().all(|mc| mc.alphas.is_empty()));
        assert!(x.iter_rows().all(|r| m.predict_row(r) == 0));
    }

    #[test]
    fn equality_constraint_holds() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()]).collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        let signs: Vec<f64> = (0..20).map(|i| if rows[i][0] > 0.0 { 1.0 } else { -1.0 }).collect();
        let sol = smo_solve(&kernel_matrix(&x, 1.0), &signs, 1.0, 1e-3, 10_000);
        assert!(sol.converged);
        let s: f64 = sol.alpha.iter().zip(&signs).map(|(a, y)| a * y).sum();
        assert!(s.abs() < 1e-9);
        assert!(sol.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }
}

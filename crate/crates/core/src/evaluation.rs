//! Split protocols, classification metrics, the clip-grouped model comparison,
//! forest feature importance and the PCA inspection embedding.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetManifest;
use crate::features::{FeatureMatrix, Standardizer};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::models::{self, Family, ForestModel, LabelEncoding, ModelArtifact, ModelError, ModelParams};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("leave-one-clip-out needs at least 2 clips, got {0}")]
    TooFewClips(usize),
    #[error("clip ids differ across classes: {0}")]
    MisalignedClips(String),
    #[error("predictions ({predictions}) and truths ({truths}) differ in length")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("cannot evaluate an empty prediction set")]
    EmptyEvaluation,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSplit {
    pub test_fraction_ppm: u32,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded, unstratified shuffle split. The test side holds
/// `round(n * test_fraction)` rows, clamped so neither side is empty.
pub fn random_split(n_rows: usize, test_fraction: f64, seed: u64) -> Result<RandomSplit, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::DegenerateSplit(format!("test fraction {test_fraction} must be in (0, 1)")));
    }
    if n_rows < 2 {
        return Err(EvalError::DegenerateSplit(format!("{n_rows} rows cannot fill both sides")));
    }
    let n_test = ((n_rows as f64 * test_fraction).round() as usize).clamp(1, n_rows - 1);
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(RandomSplit { test_fraction_ppm: (test_fraction * 1e6).round() as u32, seed, train, test })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub condition_id: usize,
    pub test_clip: u32,
    pub train_clips: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocvPlan {
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum SplitPlan {
    Random(RandomSplit),
    LeaveOneClipOut(LocvPlan),
}

/// Condition 1 holds out the last clip, conditions 2.. hold out the others in order.
pub fn build_locv_plan(clip_ids: &[u32]) -> Result<LocvPlan, EvalError> {
    let distinct: BTreeSet<u32> = clip_ids.iter().copied().collect();
    if distinct.len() != clip_ids.len() {
        return Err(EvalError::MisalignedClips(format!("duplicate clip ids in {clip_ids:?}")));
    }
    if clip_ids.len() < 2 {
        return Err(EvalError::TooFewClips(clip_ids.len()));
    }
    let last = clip_ids.len() - 1;
    let order = std::iter::once(last).chain(0..last);
    Ok(LocvPlan {
        conditions: order
            .enumerate()
            .map(|(c, t)| Condition {
                condition_id: c + 1,
                test_clip: clip_ids[t],
                train_clips: clip_ids.iter().copied().filter(|&k| k != clip_ids[t]).collect(),
            })
            .collect(),
    })
}

/// Plan over a manifest whose classes all share the same clip ids.
pub fn locv_plan_for_manifest(manifest: &DatasetManifest) -> Result<LocvPlan, EvalError> {
    let ids = manifest.clip_ids();
    for class in &manifest.classes {
        let mine: Vec<u32> = class.clips.iter().map(|c| c.clip_id).collect::<BTreeSet<_>>().into_iter().collect();
        if mine.len() < 2 {
            return Err(EvalError::TooFewClips(mine.len()));
        }
        if mine != ids {
            return Err(EvalError::MisalignedClips(format!("class '{}' has clips {mine:?}, others {ids:?}", class.name)));
        }
    }
    build_locv_plan(&ids)
}

/// Which rows of the training clips are used for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainPool {
    Original,
    Augmented,
    Both,
}

impl std::str::FromStr for TrainPool {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(TrainPool::Original),
            "augmented" => Ok(TrainPool::Augmented),
            "both" => Ok(TrainPool::Both),
            _ => Err(format!("unknown train pool '{s}'")),
        }
    }
}

impl std::fmt::Display for TrainPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainPool::Original => "original",
            TrainPool::Augmented => "augmented",
            TrainPool::Both => "both",
        })
    }
}

/// `(train, test)` row indices of one condition. Test rows are the original
/// instances of the held-out clip; nothing from that clip is ever trained on.
pub fn condition_rows<T: Scalar>(fm: &FeatureMatrix<T>, cond: &Condition, pool: TrainPool) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..fm.n_rows() {
        let g = fm.groups[i];
        let aug = fm.augmented[i];
        if g == cond.test_clip {
            if !aug {
                test.push(i);
            }
        } else if cond.train_clips.contains(&g) {
            let keep = match pool {
                TrainPool::Original => !aug,
                TrainPool::Augmented => aug,
                TrainPool::Both => true,
            };
            if keep {
                train.push(i);
            }
        }
    }
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Predicted at least once or present in the truths.
    pub present: bool,
    /// Metrics whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: usize,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(predictions: &[usize], truths: &[usize], encoding: &LabelEncoding) -> Result<EvaluationReport, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    if truths.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let k = encoding.len();
    if let Some(&bad) = predictions.iter().chain(truths).find(|&&c| c >= k) {
        return Err(EvalError::Model(ModelError::ShapeMismatch(format!("class index {bad} outside 0..{k}"))));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predictions.iter().zip(truths) {
        confusion[t][p] += 1;
    }
    let total = truths.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let mut undefined = Vec::new();
            let precision = ratio(tp, predicted).unwrap_or_else(|| {
                undefined.push("precision".to_string());
                0.0
            });
            let recall = ratio(tp, support).unwrap_or_else(|| {
                undefined.push("recall".to_string());
                0.0
            });
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                if support + predicted > 0 {
                    undefined.push("f1".to_string());
                }
                0.0
            };
            ClassMetrics {
                class: encoding.decode(c).to_string(),
                precision,
                recall,
                f1,
                support,
                present: support + predicted > 0,
                undefined,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.present).collect();
    let np = present.len() as f64;
    let macro_avg = Averages {
        precision: present.iter().map(|m| m.precision).sum::<f64>() / np,
        recall: present.iter().map(|m| m.recall).sum::<f64>() / np,
        f1: present.iter().map(|m| m.f1).sum::<f64>() / np,
    };
    let w = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64;
    let weighted_avg = Averages { precision: w(|m| m.precision), recall: w(|m| m.recall), f1: w(|m| m.f1) };
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvaluationReport { confusion, per_class, accuracy: trace as f64 / total as f64, total, macro_avg, weighted_avg })
}

impl EvaluationReport {
    /// Aligned plain-text classification report.
    pub fn to_text(&self) -> String {
        let rows: Vec<&ClassMetrics> = self.per_class.iter().filter(|m| m.present).collect();
        let width = rows.iter().map(|m| m.class.len()).chain(["weighted avg".len()]).max().unwrap_or(12);
        let mut s = String::new();
        let _ = writeln!(s, "{:>width$} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support");
        s.push('\n');
        for m in &rows {
            let _ = writeln!(
                s,
                "{:>width$} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                m.class, m.precision, m.recall, m.f1, m.support
            );
        }
        s.push('\n');
        let _ = writeln!(s, "{:>width$} {:>9} {:>9} {:>9.2} {:>9}", "accuracy", "", "", self.accuracy, self.total);
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                s,
                "{:>width$} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                name, a.precision, a.recall, a.f1, self.total
            );
        }
        let flagged: Vec<String> = self
            .per_class
            .iter()
            .filter(|m| m.present && !m.undefined.is_empty())
            .map(|m| format!("{} ({})", m.class, m.undefined.join(", ")))
            .collect();
        if !flagged.is_empty() {
            let _ = writeln!(s, "\nundefined metrics reported as 0: {}", flagged.join("; "));
        }
        s
    }
}

/// Fits a standardizer and a model on `train` rows and evaluates on `test` rows.
pub fn fit_and_evaluate<T: Scalar>(
    fm: &FeatureMatrix<T>,
    encoding: &LabelEncoding,
    train: &[usize],
    test: &[usize],
    family: Family,
    params: &ModelParams,
) -> Result<(ModelArtifact<T>, EvaluationReport), EvalError> {
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::DegenerateSplit(format!("{} train rows, {} test rows", train.len(), test.len())));
    }
    let y = encoding.encode_all(&fm.labels)?;
    let x_train = fm.data.select_rows(train);
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let standardizer = Standardizer::fit(&x_train).map_err(ModelError::from)?;
    let z_train = standardizer.apply(&x_train).map_err(ModelError::from)?;
    let model = models::train(family, &z_train, &y_train, encoding.len(), params)?;
    let artifact = ModelArtifact {
        model,
        label_encoding: encoding.clone(),
        standardizer: Some(standardizer),
        mfcc_config: None,
        provenance: None,
    };
    let pred = artifact.predict_matrix(&fm.data.select_rows(test))?;
    let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let report = evaluate(&pred, &truth, encoding)?;
    Ok((artifact, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub family: Family,
    pub condition_id: usize,
    pub test_clip: u32,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub report: Option<EvaluationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub families: Vec<Family>,
    pub conditions: Vec<Condition>,
    /// Condition-major, then family in `families` order.
    pub cells: Vec<ComparisonCell>,
}

impl ComparisonTable {
    pub fn cell(&self, family: Family, condition_id: usize) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.family == family && c.condition_id == condition_id)
    }

    /// Mean accuracy over a family's successful cells.
    pub fn average(&self, family: Family) -> Option<f64> {
        let accs: Vec<f64> = self.cells.iter().filter(|c| c.family == family).filter_map(|c| c.accuracy).collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn averages(&self) -> Vec<(Family, Option<f64>)> {
        self.families.iter().map(|&f| (f, self.average(f))).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &ComparisonCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// `model,condition,test_clip,accuracy` rows, then `model,average` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "model,condition,test_clip,accuracy")?;
        for f in &self.families {
            for c in self.cells.iter().filter(|c| c.family == *f) {
                let acc = match (&c.accuracy, &c.error) {
                    (Some(a), _) => a.to_string(),
                    (None, Some(e)) => csv_field(&format!("failed: {e}")),
                    (None, None) => "failed".into(),
                };
                writeln!(w, "{},{},{},{}", f, c.condition_id, c.test_clip, acc)?;
            }
        }
        writeln!(w, "model,average")?;
        for (f, avg) in self.averages() {
            writeln!(w, "{},{}", f, avg.map_or_else(|| "failed".into(), |a| a.to_string()))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Trains and tests every family under every condition. Standardizers are
/// fitted on each condition's training rows only; a failing cell is recorded
/// rather than aborting the table.
pub fn run_comparison<T: Scalar>(
    fm: &FeatureMatrix<T>,
    families: &[Family],
    plan: &LocvPlan,
    params: &ModelParams,
    pool: TrainPool,
) -> Result<ComparisonTable, EvalError> {
    let encoding = models::encode_labels(&fm.labels)?;
    let jobs: Vec<(&Condition, Family)> =
        plan.conditions.iter().flat_map(|c| families.iter().map(move |&f| (c, f))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(cond, family)| {
            let (train, test) = condition_rows(fm, cond, pool);
            let base = ComparisonCell {
                family,
                condition_id: cond.condition_id,
                test_clip: cond.test_clip,
                accuracy: None,
                error: None,
                report: None,
            };
            match fit_and_evaluate(fm, &encoding, &train, &test, family, params) {
                Ok((_, report)) => ComparisonCell { accuracy: Some(report.accuracy), report: Some(report), ..base },
                Err(e) => {
                    log::warn!("{family} condition {}: {e}", cond.condition_id);
                    ComparisonCell { error: Some(e.to_string()), ..base }
                }
            }
        })
        .collect();
    Ok(ComparisonTable { families: families.to_vec(), conditions: plan.conditions.clone(), cells })
}

/// Top-k cutoffs reported by [`feature_importance`].
pub const IMPORTANCE_TOP_K: [usize; 4] = [10, 20, 30, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub importances: Vec<f64>,
    /// Feature indices by descending importance (ties: lower index first).
    pub order: Vec<usize>,
    /// `(k, sum of the k largest importances)`, k capped at the width.
    pub cumulative: Vec<(usize, f64)>,
}

/// Mean Gini importance over the trees, normalized to sum to 1.
pub fn feature_importance<T: Scalar>(forest: &ForestModel<T>) -> Result<ImportanceReport, EvalError> {
    if forest.trees.is_empty() {
        return Err(ModelError::UntrainedModel("forest has no trees".into()).into());
    }
    let d = forest.n_features;
    let mut total = vec![0.0f64; d];
    for t in &forest.trees {
        for (acc, v) in total.iter_mut().zip(t.raw_importances(d)) {
            *acc += v.as_f64();
        }
    }
    let n_trees = forest.trees.len() as f64;
    total.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = total.iter().sum();
    if !(sum > 0.0) {
        return Err(ModelError::UntrainedModel("no tree in the forest made a split".into()).into());
    }
    let importances: Vec<f64> = total.iter().map(|v| v / sum).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| importances[b].partial_cmp(&importances[a]).expect("finite").then(a.cmp(&b)));
    let cumulative = IMPORTANCE_TOP_K
        .iter()
        .map(|&k| {
            let k = k.min(d);
            (k, order[..k].iter().map(|&i| importances[i]).sum())
        })
        .collect();
    Ok(ImportanceReport { importances, order, cumulative })
}

/// Two-component principal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2<T> {
    pub mean: Vec<T>,
    /// Unit principal directions; the largest-magnitude entry of each is positive.
    pub components: [Vec<T>; 2],
    pub explained_variance: [T; 2],
    pub total_variance: T,
    /// `n x 2` projected coordinates.
    pub coords: Matrix<T>,
}

pub fn pca_2d<T: Scalar>(x: &Matrix<T>) -> Result<Pca2<T>, EvalError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 || d < 2 {
        return Err(EvalError::DegenerateData(format!("need >= 2 rows and >= 2 columns, got {n} x {d}")));
    }
    let nf = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); d];
    for r in x.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut centered = x.clone();
    for i in 0..n {
        for (v, &m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    let mut cov = Matrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s: T = centered.iter_rows().map(|r| r[a] * r[b]).sum::<T>() / denom;
            cov.set(a, b, s);
            cov.set(b, a, s);
        }
    }
    let total_variance: T = (0..d).map(|a| cov.get(a, a)).sum();
    if !(total_variance > T::zero()) {
        return Err(EvalError::DegenerateData("zero variance in every column".into()));
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let component = |c: usize| {
        let mut v: Vec<T> = (0..d).map(|k| vectors.get(k, c)).collect();
        let mut pivot = 0;
        for k in 1..d {
            if v[k].abs() > v[pivot].abs() {
                pivot = k;
            }
        }
        if v[pivot] < T::zero() {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        v
    };
    let components = [component(0), component(1)];
    let mut coords = Matrix::zeros(n, 2);
    for i in 0..n {
        for (c, comp) in components.iter().enumerate() {
            coords.set(i, c, centered.row(i).iter().zip(comp).map(|(&a, &b)| a * b).sum());
        }
    }
    Ok(Pca2 {
        mean,
        components,
        explained_variance: [values[0].max(T::zero()), values[1].max(T::zero())],
        total_variance,
        coords,
    })
}

/// `n x 2` PCA coordinates of the rows of `x`.
pub fn embed_2d<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>, EvalError> {
    Ok(pca_2d(x)?.coords)
}

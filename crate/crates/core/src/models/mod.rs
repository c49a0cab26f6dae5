//! The five classifier families, label encoding and model files.

pub mod forest;
pub mod gbt;
pub mod knn;
pub mod svm;
pub mod tree;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::features::{FeatureError, MfccConfig, MfccExtractor, Standardizer};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use forest::{train_random_forest, ForestModel, ForestParams};
pub use gbt::{train_gbt, GbtModel, GbtParams};
pub use knn::{train_knn, KnnModel};
pub use svm::{kernel_matrix, scale_gamma, smo_solve, train_svm_rbf, BinaryMachine, DualSolution, Gamma, SvmModel, SvmParams};
pub use tree::{gini, train_decision_tree, DecisionTree, MaxFeatures, TreeNode, TreeParams};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("impurity of an empty node is undefined")]
    EmptyNode,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model has no trained content: {0}")]
    UntrainedModel(String),
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("model file schema violation: {0}")]
    SchemaViolation(String),
    #[error("model file schema_version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file I/O on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Deterministic generator for stream `stream` of seed `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_training_data<T: Scalar>(x: &Matrix<T>, y: &[usize], n_classes: usize) -> Result<(), ModelError> {
    if x.rows() == 0 {
        return Err(ModelError::ShapeMismatch("training matrix has no rows".into()));
    }
    if x.rows() != y.len() {
        return Err(ModelError::ShapeMismatch(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ModelError::ShapeMismatch(format!("label {bad} outside 0..{n_classes}")));
    }
    Ok(())
}

/// Lexicographically ordered class names, index = position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub classes: Vec<String>,
}

impl LabelEncoding {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn encode(&self, name: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    pub fn encode_all<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, ModelError> {
        names
            .iter()
            .map(|n| self.encode(n.as_ref()).ok_or_else(|| ModelError::UnknownLabel(n.as_ref().to_string())))
            .collect()
    }

    pub fn decode(&self, index: usize) -> &str {
        &self.classes[index]
    }
}

pub fn encode_labels<S: AsRef<str>>(names: &[S]) -> Result<LabelEncoding, ModelError> {
    let mut classes: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
    classes.sort();
    classes.dedup();
    if classes.is_empty() {
        return Err(ModelError::InvalidParameter("label encoding needs at least one class".into()));
    }
    Ok(LabelEncoding { classes })
}

pub trait Classifier<T: Scalar> {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    /// Class index for one row of the expected width.
    fn predict_row(&self, row: &[T]) -> usize;

    fn predict(&self, x: &Matrix<T>) -> Result<Vec<usize>, ModelError> {
        if x.cols() != self.n_features() {
            return Err(ModelError::ShapeMismatch(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    RandomForest,
    Gbt,
    Knn,
    SvmRbf,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::DecisionTree, Family::RandomForest, Family::Gbt, Family::Knn, Family::SvmRbf];

    pub fn name(self) -> &'static str {
        match self {
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::Gbt => "gbt",
            Family::Knn => "knn",
            Family::SvmRbf => "svm_rbf",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "decision_tree" | "dt" | "tree" => Ok(Family::DecisionTree),
            "random_forest" | "rf" | "forest" => Ok(Family::RandomForest),
            "gbt" | "xgboost" | "xgb" | "boosting" => Ok(Family::Gbt),
            "knn" => Ok(Family::Knn),
            "svm_rbf" | "svm" => Ok(Family::SvmRbf),
            other => Err(format!("unknown model family '{other}'")),
        }
    }
}

/// Hyperparameters for every family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub knn_k: usize,
    pub gbt: GbtParams,
    pub svm: SvmParams,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            knn_k: 5,
            gbt: GbtParams::default(),
            svm: SvmParams::default(),
        }
    }
}

impl ModelParams {
    /// Applies one seed to every stochastic component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.tree.seed = seed;
        self.forest.base_seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    DecisionTree(DecisionTree<T>),
    RandomForest(ForestModel<T>),
    Gbt(GbtModel<T>),
    Knn(KnnModel<T>),
    SvmRbf(SvmModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn family(&self) -> Family {
        match self {
            Model::DecisionTree(_) => Family::DecisionTree,
            Model::RandomForest(_) => Family::RandomForest,
            Model::Gbt(_) => Family::Gbt,
            Model::Knn(_) => Family::Knn,
            Model::SvmRbf(_) => Family::SvmRbf,
        }
    }

    fn inner(&self) -> &dyn Classifier<T> {
        match self {
            Model::DecisionTree(m) => m,
            Model::RandomForest(m) => m,
            Model::Gbt(m) => m,
            Model::Knn(m) => m,
            Model::SvmRbf(m) => m,
        }
    }

    fn payload_json(&self) -> serde_json::Value {
        let v = match self {
            Model::DecisionTree(m) => serde_json::to_value(m),
            Model::RandomForest(m) => serde_json::to_value(m),
            Model::Gbt(m) => serde_json::to_value(m),
            Model::Knn(m) => serde_json::to_value(m),
            Model::SvmRbf(m) => serde_json::to_value(m),
        };
        v.expect("model payload serializes")
    }

    fn from_payload(family: Family, v: serde_json::Value) -> Result<Self, serde_json::Error> {
        Ok(match family {
            Family::DecisionTree => Model::DecisionTree(serde_json::from_value(v)?),
            Family::RandomForest => Model::RandomForest(serde_json::from_value(v)?),
            Family::Gbt => Model::Gbt(serde_json::from_value(v)?),
            Family::Knn => Model::Knn(serde_json::from_value(v)?),
            Family::SvmRbf => Model::SvmRbf(serde_json::from_value(v)?),
        })
    }
}

impl<T: Scalar> Classifier<T> for Model<T> {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn predict_row(&self, row: &[T]) -> usize {
        self.inner().predict_row(row)
    }
}

pub fn train<T: Scalar>(
    family: Family,
    x: &Matrix<T>,
    y: &[usize],
    n_classes: usize,
    params: &ModelParams,
) -> Result<Model<T>, ModelError> {
    Ok(match family {
        Family::DecisionTree => Model::DecisionTree(train_decision_tree(x, y, n_classes, &params.tree)?),
        Family::RandomForest => Model::RandomForest(train_random_forest(x, y, n_classes, &params.forest)?),
        Family::Gbt => Model::Gbt(train_gbt(x, y, n_classes, &params.gbt)?),
        Family::Knn => Model::Knn(train_knn(x, y, n_classes, params.knn_k)?),
        Family::SvmRbf => Model::SvmRbf(train_svm_rbf(x, y, n_classes, &params.svm)?),
    })
}

/// A trained model with everything needed to classify raw audio.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact<T> {
    pub model: Model<T>,
    pub label_encoding: LabelEncoding,
    pub standardizer: Option<Standardizer<T>>,
    pub mfcc_config: Option<MfccConfig>,
    /// Free-form run configuration and input digests.
    pub provenance: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct ArtifactFile {
    schema_version: u32,
    family: Family,
    label_encoding: LabelEncoding,
    standardizer: Option<serde_json::Value>,
    mfcc_config: Option<MfccConfig>,
    payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl<T: Scalar> ModelArtifact<T> {
    pub fn family(&self) -> Family {
        self.model.family()
    }

    /// Predicts from an un-standardized feature row.
    pub fn predict_features(&self, row: &[T]) -> Result<usize, ModelError> {
        let z;
        let row = match &self.standardizer {
            Some(s) => {
                z = s.apply_row(row)?;
                &z[..]
            }
            None => row,
        };
        if row.len() != self.model.n_features() {
            return Err(ModelError::ShapeMismatch(format!(
                "model expects {} features, got {}",
                self.model.n_features(),
                row.len()
            )));
        }
        Ok(self.model.predict_row(row))
    }

    pub fn predict_matrix(&self, x: &Matrix<T>) -> Result<Vec<usize>, ModelError> {
        let x = match &self.standardizer {
            Some(s) => s.apply(x)?,
            None => x.clone(),
        };
        self.model.predict(&x)
    }

    /// End-to-end: MFCC summary of `clip` with the stored config, then predict.
    pub fn predict_clip(&self, clip: &AudioClip<T>) -> Result<usize, ModelError> {
        let cfg = self
            .mfcc_config
            .as_ref()
            .ok_or_else(|| ModelError::UntrainedModel("artifact has no MFCC configuration".into()))?;
        let feats = MfccExtractor::new(cfg, clip.sample_rate)?.features(clip)?;
        self.predict_features(&feats)
    }

    pub fn to_json(&self) -> String {
        let file = ArtifactFile {
            schema_version: MODEL_SCHEMA_VERSION,
            family: self.family(),
            label_encoding: self.label_encoding.clone(),
            standardizer: self.standardizer.as_ref().map(|s| serde_json::to_value(s).expect("standardizer serializes")),
            mfcc_config: self.mfcc_config.clone(),
            payload: self.model.payload_json(),
            provenance: self.provenance.clone(),
        };
        serde_json::to_string(&file).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::SchemaViolation(e.to_string()))?;
        let version = raw
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| ModelError::SchemaViolation("missing schema_version".into()))?;
        if version != MODEL_SCHEMA_VERSION as u64 {
            return Err(ModelError::VersionMismatch { found: version as u32, expected: MODEL_SCHEMA_VERSION });
        }
        let file: ArtifactFile = serde_json::from_value(raw).map_err(|e| ModelError::SchemaViolation(e.to_string()))?;
        let schema = |e: serde_json::Error| ModelError::SchemaViolation(e.to_string());
        let model = Model::from_payload(file.family, file.payload).map_err(schema)?;
        let standardizer = file.standardizer.map(serde_json::from_value).transpose().map_err(schema)?;
        let artifact = Self {
            model,
            label_encoding: file.label_encoding,
            standardizer,
            mfcc_config: file.mfcc_config,
            provenance: file.provenance,
        };
        if artifact.model.n_classes() != artifact.label_encoding.len() {
            return Err(ModelError::SchemaViolation(format!(
                "model has {} classes but the label encoding lists {}",
                artifact.model.n_classes(),
                artifact.label_encoding.len()
            )));
        }
        if let Some(s) = &artifact.standardizer {
            if s.width() != artifact.model.n_features() {
                return Err(ModelError::SchemaViolation("standardizer width differs from model width".into()));
            }
        }
        Ok(artifact)
    }
}

pub fn save_model<T: Scalar>(artifact: &ModelArtifact<T>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, artifact.to_json()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelArtifact<T>, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    ModelArtifact::from_json(&text)
}

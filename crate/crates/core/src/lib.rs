//! Insect-audio classification toolkit.
//!
//! Audio is cut into fixed one-second instances, summarized by MFCC
//! statistics and classified by one of five from-scratch learners (CART,
//! random forest, softmax gradient boosting, k-NN, RBF SVM). Evaluation holds
//! out whole recording clips so no instance of a test clip leaks into
//! training.
//!
//! The numeric code is generic over [`Scalar`] (`f32` / `f64`); the
//! `*F32` / `*F64` aliases below name the common instantiations.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod augment;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod linalg;
pub mod models;
pub mod scalar;

use thiserror::Error;

pub use linalg::Matrix;
pub use scalar::Scalar;

pub type AudioClipF32 = audio_io::AudioClip<f32>;
pub type AudioClipF64 = audio_io::AudioClip<f64>;
pub type InstanceRecordF32 = dataset::InstanceRecord<f32>;
pub type InstanceRecordF64 = dataset::InstanceRecord<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type StandardizerF32 = features::Standardizer<f32>;
pub type StandardizerF64 = features::Standardizer<f64>;
pub type MfccExtractorF32 = features::MfccExtractor<f32>;
pub type MfccExtractorF64 = features::MfccExtractor<f64>;
pub type ModelF32 = models::Model<f32>;
pub type ModelF64 = models::Model<f64>;
pub type ModelArtifactF32 = models::ModelArtifact<f32>;
pub type ModelArtifactF64 = models::ModelArtifact<f64>;
pub type ForestModelF64 = models::ForestModel<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type MatrixF64 = Matrix<f64>;

/// Any failure raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] audio_io::AudioError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Augment(#[from] augment::AugmentError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

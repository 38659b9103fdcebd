//! Palmprint recognition from directional wavelet scattering features.
//!
//! An image is cut into square blocks, each block goes through a two-layer Morlet
//! scattering cascade, and the mean and variance of every scattering map form the
//! feature vector. Vectors are reduced with PCA and matched with either a nearest
//! neighbour rule or a one-vs-one linear SVM.
//!
//! ```
//! use palmscat::{build_filter_bank, enumerate_paths, FeatureSchema};
//!
//! let schema = FeatureSchema::new(128, 32, 5, 6, 2).unwrap();
//! assert_eq!(enumerate_paths(5, 6, 2).unwrap().len(), 391);
//! assert_eq!(schema.dim, 12512);
//! let bank = build_filter_bank(schema.filter_config()).unwrap();
//! assert_eq!(bank.band_pass_count(), 30);
//! ```

mod bytes;
pub mod cache;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod fft;
pub mod filterbank;
pub mod image;
pub mod model;
pub mod pca;
pub mod pgm;
pub mod scattering;

pub use cache::FeatureCache;
pub use classify::{
    nn_predict, svm_predict, svm_train_binary, GalleryIndex, NnMatch, SvmModel, SvmParams, SvmPrediction, Template,
};
pub use dataset::{load_directory, split, synth_generate, LabeledDataset, LoadReport, Sample, SplitMode, SplitSpec};
pub use error::{DecodeError, Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, PcaFitOn};
pub use features::{extract_features, FeatureExtractor, FeatureSchema, FeatureVector};
pub use filterbank::{build_filter_bank, FilterBank, FilterBankConfig};
pub use image::Image;
pub use model::{ClassifierKind, Matcher, Recognizer};
pub use pca::{pca_fit, pca_project, retained_variance, CovarianceScaling, PcaModel};
pub use scattering::{enumerate_paths, transform_block, Scattering, ScatteringMaps, ScatteringPath};

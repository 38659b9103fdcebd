//! Identity prediction from reduced feature vectors.

mod nn;
mod svm;

pub use nn::{nn_predict, GalleryIndex, NnMatch, Template};
pub use svm::{
    dual_objective, primal_objective, svm_predict, svm_train_binary, BinarySolution, PairClassifier,
    SvmModel, SvmParams, SvmPrediction,
};

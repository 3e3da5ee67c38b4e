//! Oocyte viability assessment from segmentation masks.
//!
//! The crate is `no_std` and only needs an allocator. It covers the whole
//! numerical side of the pipeline: mask morphology, ellipse fitting and the
//! geometric descriptors, undecimated Haar wavelet texture energies, the
//! canonical 24-feature vector, an SMO-trained RBF support vector machine with
//! cross-validation, and the evaluation metrics. File formats and the command
//! line live in the `oocyte-pipeline` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod eval;
pub mod features;
pub mod geometry;
pub mod imagery;
pub mod morphology;
pub mod svm;
pub mod synth;
pub mod texture;

pub use features::{FeatureVector, Label, NormStats, FEATURE_COUNT, FEATURE_NAMES};
pub use geometry::{Ellipse, GeometricFeatures};
pub use imagery::{BinaryMask, ClassLabel, GrayImage, LabelMask};
pub use morphology::{Component, Roi, ROI_SIDE};
pub use svm::{SvmHyperparams, SvmModel};
pub use texture::TextureFeatures;

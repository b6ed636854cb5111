//! Core algorithms for classifying samples from deep image features fused
//! with ASCII-decimal encoded metadata.
//!
//! The crate is `no_std` and needs only `alloc`. Everything here is a pure
//! function of its inputs: file formats, CSV ingestion, timing and the
//! experiment CLI live in the `metafuse` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`codec::encode_table`] maps metadata records to a fixed-width code
//!    matrix (`'5'` → 53, padding → 32, missing → 0).
//! 2. [`fusion::fuse`] concatenates image features and metadata codes
//!    column-wise, image block first.
//! 3. [`softmax::train`] fits a linear softmax classifier by full-batch
//!    gradient descent on standardized inputs.
//! 4. [`metrics::evaluate`] computes one-vs-rest confusion metrics, macro
//!    averages and per-class ROC curves; [`metrics::delta_report`] compares
//!    two evaluations.
//!
//! [`augment`] holds the image-space operator (flip, rotate, shift) and the
//! bilinear resize applied before feature extraction.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod augment;
pub mod codec;
pub mod dataset;
pub mod fusion;
pub mod matrix;
pub mod metrics;
pub mod softmax;
pub mod split;

pub use codec::{decode_table, encode_table, EncodedMetadata, FieldSpan, MetadataTable};
pub use dataset::{FeatureMatrix, LabelVector};
pub use fusion::{fuse, FusedMatrix};
pub use matrix::Matrix;
pub use metrics::{
    class_metrics, confusion, delta_report, evaluate, macro_average, roc_auroc, ClassMetrics, ConfusionMatrix,
    DeltaReport, EvaluationReport, Measures, RocCurve,
};
pub use softmax::{predict, predict_proba, softmax, train, SoftmaxModel, TrainConfig, TrainTrace};
pub use split::{fixed_split, SplitSpec};

/// 64-bit FNV-1a. Used for split fingerprints and per-sample seed derivation,
/// where a stable cross-platform hash is required.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

// SPDX-License-Identifier: Apache-2.0

//! Smart-pixel pileup classification: track tensors, y-profile features,
//! a single gradient-boosted regression tree, `<28,19>` fixed-point
//! quantization and efficiency/rejection metrics.

pub mod dataset;
pub mod fixed;
pub mod metrics;
pub mod quant;
pub mod track;
pub mod train;
pub mod tree;

use thiserror::Error;

pub use dataset::{read_samples, split_dataset, synth_dataset, write_tracks, Sample};
pub use fixed::Fixed;
pub use metrics::{auc, evaluate, roc_curve, roc_csv, roc_svg, threshold_sweep, Classifier, EvalReport, RocPoint};
pub use quant::{quantize, quantize_features, QuantNode, QuantTreeModel};
pub use track::{extract_features, synth_track, Class, FeatureVector, Track, N_FEATURES};
pub use train::{train_tree, TrainOptions};
pub use tree::{Node, TreeModel, MAX_DEPTH};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("model schema: {0}")]
    Schema(String),
    #[error("tree depth {0} exceeds the limit of {MAX_DEPTH}")]
    DepthExceeded(usize),
    #[error("feature index {0} out of range")]
    FeatureIndexOutOfRange(usize),
    #[error("{0} is not representable in <28,19>")]
    Overflow(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

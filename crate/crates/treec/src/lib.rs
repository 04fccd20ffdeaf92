// SPDX-License-Identifier: Apache-2.0

//! Compiles a quantized decision tree to a LUT4 netlist for the fabric and
//! checks the result bit-exactly against the software model.

pub mod compile;
pub mod equiv;
pub mod fit;
pub mod map;
pub mod reduced;

use efab_ml::{split_dataset, synth_dataset, train_tree, MlError, Sample, TrainOptions, TreeModel};
use thiserror::Error;

pub use compile::{compile_tree, compile_with, CompiledTree, DEFAULT_WIDTH, MAX_INTERNAL_NODES, MAX_LUT_LEVELS};
pub use equiv::{equivalence_check, stimulus, Counterexample, EquivalenceReport, Vector};
pub use fit::{estimate_resources, fit_netlist, FitReport};
pub use reduced::{exhaustive_vectors, narrow_variant, used_features};

/// Tracks in the synthetic training set of [`reference_model`].
pub const REFERENCE_TRACKS: usize = 10_000;

/// A tree trained on synthetic tracks: ten leaves grown best-first (nine
/// thresholds), depth at most five, 80% of the tracks for training.
/// Returns the held-out tracks too.
pub fn reference_model(seed: u64) -> Result<(TreeModel, Vec<Sample>), MlError> {
    let data = synth_dataset(REFERENCE_TRACKS, seed);
    let (train, test) = split_dataset(&data, 0.8, seed)?;
    Ok((train_tree(&train, &TrainOptions::ten_leaves())?, test))
}

#[derive(Debug, Error, PartialEq)]
pub enum TreecError {
    #[error("{0} internal nodes; at most {MAX_INTERNAL_NODES} compile")]
    TooManyNodes(usize),
    #[error("leaf score {0} is not representable in <28,19>")]
    Overflow(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("bus width {0} outside 2..={DEFAULT_WIDTH}")]
    Width(usize),
    #[error("feature {feature} raw value {raw} does not fit {width} bits")]
    FeatureOutOfRange { feature: usize, raw: i32, width: usize },
    #[error(transparent)]
    Netlist(#[from] efab_core::cad::NetlistError),
}

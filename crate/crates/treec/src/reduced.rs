// SPDX-License-Identifier: Apache-2.0

//! Narrow-bus variants of a tree, small enough to check exhaustively.
//!
//! The variant keeps the topology, leaves and score threshold. Split
//! features fold onto at most `max_features` buses in order of first use,
//! and the distinct thresholds are spread over the narrow range in rank
//! order.

use efab_ml::{Fixed, QuantNode, QuantTreeModel, N_FEATURES};

use crate::equiv::Vector;

pub fn narrow_variant(model: &QuantTreeModel, width: usize, max_features: usize) -> QuantTreeModel {
    assert!((2..=16).contains(&width) && (1..=N_FEATURES).contains(&max_features));
    let mut order: Vec<usize> = Vec::new();
    let mut thresholds: Vec<Fixed> = Vec::new();
    for n in &model.nodes {
        if let QuantNode::Split { feature, threshold, .. } = *n {
            if !order.contains(&feature) {
                order.push(feature);
            }
            thresholds.push(threshold);
        }
    }
    thresholds.sort();
    thresholds.dedup();
    let lo = -(1i64 << (width - 1));
    let span = (1i64 << width) - 1;
    let n = thresholds.len() as i64;
    let remap = |t: Fixed| {
        let r = thresholds.binary_search(&t).unwrap() as i64;
        // ranks 0..n land strictly inside [lo, lo + span)
        Fixed::from_raw((lo + (r + 1) * span / (n + 1)) as i32).unwrap()
    };
    let nodes = model
        .nodes
        .iter()
        .map(|n| match *n {
            QuantNode::Split { feature, threshold, left, right } => QuantNode::Split {
                feature: order.iter().position(|&f| f == feature).unwrap() % max_features,
                threshold: remap(threshold),
                left,
                right,
            },
            leaf => leaf,
        })
        .collect();
    QuantTreeModel { nodes, ..model.clone() }
}

/// Features a model's splits read, ascending.
pub fn used_features(model: &QuantTreeModel) -> Vec<usize> {
    let mut f: Vec<usize> = model
        .nodes
        .iter()
        .filter_map(|n| match *n {
            QuantNode::Split { feature, .. } => Some(feature),
            QuantNode::Leaf { .. } => None,
        })
        .collect();
    f.sort();
    f.dedup();
    f
}

/// Every assignment of `width`-bit values to `features`; other features
/// stay zero.
pub fn exhaustive_vectors(width: usize, features: &[usize]) -> Vec<Vector> {
    let values = 1usize << width;
    let total = values.pow(features.len() as u32);
    let lo = -(1i32 << (width - 1));
    (0..total)
        .map(|mut i| {
            let mut v = [Fixed::ZERO; N_FEATURES];
            for &f in features {
                v[f] = Fixed::from_raw(lo + (i % values) as i32).unwrap();
                i /= values;
            }
            v
        })
        .collect()
}

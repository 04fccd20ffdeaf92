// SPDX-License-Identifier: Apache-2.0

//! `<28,19>` version of a [`TreeModel`]. Thresholds round down so that a
//! feature already on the fixed-point grid takes the same branch as in the
//! real-valued tree. Leaf contributions `learning_rate * leaf` and the base
//! score round to nearest, ties to even.

use crate::fixed::Fixed;
use crate::track::{FeatureVector, N_FEATURES};
use crate::tree::{logit, sigmoid, Node, TreeModel};
use crate::MlError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantNode {
    Split { feature: usize, threshold: Fixed, left: usize, right: usize },
    /// Already scaled by the learning rate.
    Leaf { value: Fixed },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantTreeModel {
    pub base_score: Fixed,
    pub nodes: Vec<QuantNode>,
    /// Probability threshold the decision bit implements.
    pub probability_threshold: f64,
    /// `logit(probability_threshold)` on the grid.
    pub score_threshold: Fixed,
}

pub fn quantize_features(features: &FeatureVector) -> [Fixed; N_FEATURES] {
    features.map(Fixed::saturating_from_f64)
}

pub fn quantize(model: &TreeModel, probability_threshold: f64) -> Result<QuantTreeModel, MlError> {
    model.validate()?;
    let base_score = Fixed::from_f64(model.base_score)?;
    let nodes = model
        .nodes
        .iter()
        .map(|n| {
            Ok(match *n {
                Node::Split { feature, threshold, left, right } => {
                    QuantNode::Split { feature, threshold: Fixed::floor_f64(threshold)?, left, right }
                }
                Node::Leaf { value } => {
                    let v = Fixed::from_f64(model.learning_rate * value)?;
                    base_score.checked_add(v).ok_or(MlError::Overflow(model.base_score + model.learning_rate * value))?;
                    QuantNode::Leaf { value: v }
                }
            })
        })
        .collect::<Result<Vec<_>, MlError>>()?;
    let t = logit(probability_threshold);
    let score_threshold = if t.is_infinite() {
        if t > 0.0 { Fixed::MAX } else { Fixed::MIN }
    } else {
        Fixed::from_f64(t)?
    };
    Ok(QuantTreeModel { base_score, nodes, probability_threshold, score_threshold })
}

impl QuantTreeModel {
    pub fn leaf_index(&self, features: &[Fixed; N_FEATURES]) -> usize {
        let mut i = 0;
        while let QuantNode::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if features[feature] <= threshold { left } else { right };
        }
        i
    }

    /// Score of leaf node `i`.
    pub fn leaf_score(&self, i: usize) -> Fixed {
        match self.nodes[i] {
            QuantNode::Leaf { value } => self.base_score.checked_add(value).expect("checked at quantization"),
            QuantNode::Split { .. } => panic!("node {i} is not a leaf"),
        }
    }

    pub fn score(&self, features: &[Fixed; N_FEATURES]) -> Fixed {
        self.leaf_score(self.leaf_index(features))
    }

    /// Hardware decision bit: signal when the score reaches the threshold.
    pub fn decision(&self, score: Fixed) -> bool {
        score >= self.score_threshold
    }

    /// (score, decision bit, probability of signal).
    pub fn predict(&self, features: &[Fixed; N_FEATURES]) -> (Fixed, bool, f64) {
        let s = self.score(features);
        (s, self.decision(s), sigmoid(s.to_f64()))
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, QuantNode::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[QuantNode], i: usize) -> usize {
            match nodes[i] {
                QuantNode::Leaf { .. } => 0,
                QuantNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Same model with a different decision threshold.
    pub fn with_threshold(&self, probability_threshold: f64) -> Result<Self, MlError> {
        let t = logit(probability_threshold);
        let score_threshold = if t.is_infinite() {
            if t > 0.0 { Fixed::MAX } else { Fixed::MIN }
        } else {
            Fixed::from_f64(t)?
        };
        Ok(QuantTreeModel { probability_threshold, score_threshold, ..self.clone() })
    }
}

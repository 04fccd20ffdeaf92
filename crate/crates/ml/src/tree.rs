// SPDX-License-Identifier: Apache-2.0

//! Single regression tree with a log-odds prior.
//!
//! Model text is JSON:
//!
//! ```text
//! { "base_score": -0.02, "learning_rate": 0.1,
//!   "tree": { "feature": 3, "threshold": 11.5,
//!             "left": { "leaf": 0.8 }, "right": { "leaf": -0.6 } } }
//! ```
//!
//! A sample goes left when `features[feature] <= threshold`.

use serde_json::{json, Map, Value};

use crate::track::{FeatureVector, N_FEATURES};
use crate::MlError;

pub const MAX_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Nodes are stored in preorder with the root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub nodes: Vec<Node>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl TreeModel {
    pub fn leaf(base_score: f64, learning_rate: f64, value: f64) -> Self {
        TreeModel { base_score, learning_rate, nodes: vec![Node::Leaf { value }] }
    }

    /// Checks shape, feature range and depth.
    pub fn validate(&self) -> Result<(), MlError> {
        if self.nodes.is_empty() {
            return Err(MlError::Schema("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        let mut depth = 0;
        while let Some((i, d)) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(MlError::Schema(format!("node {i} is reached twice")));
            }
            depth = depth.max(d);
            if let Node::Split { feature, threshold, left, right } = self.nodes[i] {
                if feature >= N_FEATURES {
                    return Err(MlError::FeatureIndexOutOfRange(feature));
                }
                if !threshold.is_finite() {
                    return Err(MlError::Schema(format!("node {i} threshold {threshold}")));
                }
                for c in [left, right] {
                    if c >= self.nodes.len() {
                        return Err(MlError::Schema(format!("node {i} child {c} out of range")));
                    }
                    stack.push((c, d + 1));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(MlError::Schema(format!("node {i} is unreachable")));
        }
        if depth > MAX_DEPTH {
            return Err(MlError::DepthExceeded(depth));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaves(&self) -> usize {
        self.nodes.len() - self.internal_nodes()
    }

    /// Index of the leaf `features` reaches.
    pub fn leaf_index(&self, features: &FeatureVector) -> usize {
        let mut i = 0;
        while let Node::Split { feature, threshold, left, right } = self.nodes[i] {
            i = if features[feature] <= threshold { left } else { right };
        }
        i
    }

    pub fn score(&self, features: &FeatureVector) -> f64 {
        match self.nodes[self.leaf_index(features)] {
            Node::Leaf { value } => self.base_score + self.learning_rate * value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// (score, probability of signal).
    pub fn predict(&self, features: &FeatureVector) -> (f64, f64) {
        let s = self.score(features);
        (s, sigmoid(s))
    }

    fn node_json(&self, i: usize) -> Value {
        match self.nodes[i] {
            Node::Leaf { value } => json!({ "leaf": value }),
            Node::Split { feature, threshold, left, right } => json!({
                "feature": feature,
                "threshold": threshold,
                "left": self.node_json(left),
                "right": self.node_json(right),
            }),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "tree": self.node_json(0),
        })
    }

    pub fn export(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("JSON values serialize")
    }

    pub fn import(text: &str) -> Result<Self, MlError> {
        let v: Value = serde_json::from_str(text).map_err(|e| MlError::Schema(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| MlError::Schema("model must be an object".into()))?;
        let num = |o: &Map<String, Value>, k: &str| -> Result<f64, MlError> {
            o.get(k).and_then(Value::as_f64).ok_or_else(|| MlError::Schema(format!("missing number `{k}`")))
        };
        let mut model = TreeModel {
            base_score: num(obj, "base_score")?,
            learning_rate: num(obj, "learning_rate")?,
            nodes: Vec::new(),
        };
        let tree = obj.get("tree").ok_or_else(|| MlError::Schema("missing `tree`".into()))?;
        fn walk(v: &Value, depth: usize, nodes: &mut Vec<Node>) -> Result<usize, MlError> {
            if depth > MAX_DEPTH {
                return Err(MlError::DepthExceeded(depth));
            }
            let o = v.as_object().ok_or_else(|| MlError::Schema("node must be an object".into()))?;
            let idx = nodes.len();
            if let Some(leaf) = o.get("leaf") {
                let value = leaf.as_f64().ok_or_else(|| MlError::Schema("`leaf` must be a number".into()))?;
                nodes.push(Node::Leaf { value });
                return Ok(idx);
            }
            let feature = o
                .get("feature")
                .and_then(Value::as_u64)
                .ok_or_else(|| MlError::Schema("split needs an integer `feature`".into()))? as usize;
            if feature >= N_FEATURES {
                return Err(MlError::FeatureIndexOutOfRange(feature));
            }
            let threshold = o
                .get("threshold")
                .and_then(Value::as_f64)
                .ok_or_else(|| MlError::Schema("split needs a numeric `threshold`".into()))?;
            let (Some(l), Some(r)) = (o.get("left"), o.get("right")) else {
                return Err(MlError::Schema("split needs `left` and `right`".into()));
            };
            nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
            let left = walk(l, depth + 1, nodes)?;
            let right = walk(r, depth + 1, nodes)?;
            nodes[idx] = Node::Split { feature, threshold, left, right };
            Ok(idx)
        }
        walk(tree, 0, &mut model.nodes)?;
        model.validate()?;
        Ok(model)
    }
}

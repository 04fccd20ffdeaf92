// SPDX-License-Identifier: Apache-2.0

//! One boosting round on log loss: the prior is the log-odds of signal
//! prevalence, one CART regression tree is fit to the residuals
//! `y - p` by squared error, and each leaf takes the Newton step
//! `sum(y - p) / (n p (1 - p))`.

use crate::dataset::Sample;
use crate::tree::{logit, Node, TreeModel, MAX_DEPTH};
use crate::track::N_FEATURES;
use crate::MlError;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
    /// Grow best-first until this many leaves (pruning to a budget).
    pub max_leaves: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { max_depth: MAX_DEPTH, min_leaf: 32, learning_rate: 0.1, max_leaves: None }
    }
}

impl TrainOptions {
    /// Nine thresholds: ten leaves grown best-first.
    pub fn ten_leaves() -> Self {
        TrainOptions { max_leaves: Some(10), ..TrainOptions::default() }
    }
}

#[derive(Clone, Copy, Debug)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grow {
    rows: Vec<usize>,
    depth: usize,
    split: Option<Split>,
    children: Option<(usize, usize)>,
}

fn best_split(samples: &[Sample], residual: &[f64], rows: &[usize], min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| residual[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Split> = None;
    let mut sorted = rows.to_vec();
    for f in 0..N_FEATURES {
        sorted.sort_by(|&a, &b| samples[a].features[f].total_cmp(&samples[b].features[f]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..n {
            left += residual[sorted[k - 1]];
            if k < min_leaf.max(1) || n - k < min_leaf.max(1) {
                continue;
            }
            let (lo, hi) = (samples[sorted[k - 1]].features[f], samples[sorted[k]].features[f]);
            if lo >= hi {
                continue;
            }
            let right = total - left;
            let gain = left * left / k as f64 + right * right / (n - k) as f64 - parent;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split { feature: f, threshold, gain });
            }
        }
    }
    best
}

pub fn train_tree(samples: &[Sample], opts: &TrainOptions) -> Result<TreeModel, MlError> {
    if samples.len() < 2 {
        return Err(MlError::EmptyDataset);
    }
    let positives = samples.iter().filter(|s| s.is_signal()).count();
    if positives == 0 || positives == samples.len() {
        return Err(MlError::SingleClassDataset);
    }
    let max_depth = opts.max_depth.min(MAX_DEPTH);
    let p = positives as f64 / samples.len() as f64;
    let residual: Vec<f64> = samples.iter().map(|s| s.is_signal() as u8 as f64 - p).collect();
    let hessian = p * (1.0 - p);

    let root_rows: Vec<usize> = (0..samples.len()).collect();
    let root_split = best_split(samples, &residual, &root_rows, opts.min_leaf);
    let mut grow = vec![Grow { rows: root_rows, depth: 0, split: root_split, children: None }];
    let mut leaves = 1;
    loop {
        if opts.max_leaves.is_some_and(|m| leaves >= m) {
            break;
        }
        let pick = grow
            .iter()
            .enumerate()
            .filter(|(_, g)| g.children.is_none() && g.depth < max_depth)
            .filter_map(|(i, g)| g.split.map(|s| (i, s.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                Some((_, g)) if g >= gain => acc,
                _ => Some((i, gain)),
            });
        let Some((i, _)) = pick else { break };
        let s = grow[i].split.unwrap();
        let (l, r): (Vec<usize>, Vec<usize>) =
            grow[i].rows.iter().partition(|&&row| samples[row].features[s.feature] <= s.threshold);
        let depth = grow[i].depth + 1;
        for rows in [l, r] {
            let split = if depth < max_depth { best_split(samples, &residual, &rows, opts.min_leaf) } else { None };
            grow.push(Grow { rows, depth, split, children: None });
        }
        grow[i].children = Some((grow.len() - 2, grow.len() - 1));
        leaves += 1;
    }

    let mut nodes = Vec::with_capacity(grow.len());
    fn emit(g: &[Grow], i: usize, residual: &[f64], hessian: f64, nodes: &mut Vec<Node>) -> usize {
        let idx = nodes.len();
        match g[i].children {
            None => {
                let sum: f64 = g[i].rows.iter().map(|&r| residual[r]).sum();
                nodes.push(Node::Leaf { value: sum / (g[i].rows.len() as f64 * hessian) });
            }
            Some((a, b)) => {
                let s = g[i].split.unwrap();
                nodes.push(Node::Leaf { value: 0.0 });
                let left = emit(g, a, residual, hessian, nodes);
                let right = emit(g, b, residual, hessian, nodes);
                nodes[idx] = Node::Split { feature: s.feature, threshold: s.threshold, left, right };
            }
        }
        idx
    }
    emit(&grow, 0, &residual, hessian, &mut nodes);
    let model = TreeModel { base_score: logit(p), learning_rate: opts.learning_rate, nodes };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: f64, signal: bool) -> Sample {
        let mut features = [0.0; N_FEATURES];
        features[4] = x;
        Sample { features, pt: if signal { 5.0 } else { 1.0 } }
    }

    #[test]
    fn separable_data_gives_one_split() {
        let data: Vec<Sample> = (0..200).map(|i| sample(i as f64, i < 80)).collect();
        let m = train_tree(&data, &TrainOptions::default()).unwrap();
        assert_eq!(m.nodes[0], Node::Split { feature: 4, threshold: 79.5, left: 1, right: 2 });
        assert_eq!(m.depth(), 1);
        // leaves push the score above the prior for signal, below for background
        let correct = data.iter().filter(|s| (m.score(&s.features) > m.base_score) == s.is_signal()).count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<Sample> = (0..50).map(|i| sample(i as f64, true)).collect();
        assert!(matches!(train_tree(&data, &TrainOptions::default()), Err(MlError::SingleClassDataset)));
        assert!(matches!(train_tree(&data[..1], &TrainOptions::default()), Err(MlError::EmptyDataset)));
    }

    #[test]
    fn prior_is_prevalence_log_odds() {
        let data: Vec<Sample> = (0..100).map(|i| sample(0.0, i < 25)).collect();
        let m = train_tree(&data, &TrainOptions::default()).unwrap();
        assert!((m.base_score - (0.25f64 / 0.75).ln()).abs() < 1e-12);
        assert_eq!(m.nodes.len(), 1);
    }

    #[test]
    fn leaf_budget_limits_thresholds() {
        let data: Vec<Sample> = (0..2000)
            .map(|i| {
                let mut s = sample((i * 7919 % 2000) as f64, (i * 31 % 7) < 3);
                s.features[1] = (i % 97) as f64;
                s
            })
            .collect();
        let m = train_tree(&data, &TrainOptions::ten_leaves()).unwrap();
        assert!(m.internal_nodes() <= 9);
        assert!(m.depth() <= MAX_DEPTH);
    }
}

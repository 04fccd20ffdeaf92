// SPDX-License-Identifier: Apache-2.0

use efab_ml::quant::quantize_features;
use efab_ml::track::{synth_length, CHARGE_LEN, Y_PIXELS};
use efab_ml::tree::{logit, sigmoid};
use efab_ml::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Random well-formed tree with thresholds and leaves drawn from `rng`.
fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize, grid_thresholds: bool) -> TreeModel {
    fn grow(rng: &mut ChaCha8Rng, depth: usize, max_depth: usize, grid: bool, nodes: &mut Vec<Node>) -> usize {
        let idx = nodes.len();
        if depth == max_depth || (depth > 0 && rng.gen_bool(0.3)) {
            nodes.push(Node::Leaf { value: rng.gen_range(-4.0..4.0) });
            return idx;
        }
        let t: f64 = rng.gen_range(-20.0..20.0);
        let threshold = if grid { (t * 512.0).floor() / 512.0 } else { t };
        nodes.push(Node::Leaf { value: 0.0 });
        let left = grow(rng, depth + 1, max_depth, grid, nodes);
        let right = grow(rng, depth + 1, max_depth, grid, nodes);
        nodes[idx] = Node::Split { feature: rng.gen_range(0..N_FEATURES), threshold, left, right };
        idx
    }
    let mut nodes = Vec::new();
    grow(rng, 0, max_depth, grid_thresholds, &mut nodes);
    TreeModel { base_score: rng.gen_range(-1.0..1.0), learning_rate: rng.gen_range(0.05..1.0), nodes }
}

fn random_features(rng: &mut ChaCha8Rng, grid: bool) -> FeatureVector {
    std::array::from_fn(|_| {
        let v: f64 = rng.gen_range(-24.0..24.0);
        if grid { (v * 512.0).round() / 512.0 } else { v }
    })
}

/// Walks the exported JSON rather than the node array.
fn json_oracle(tree: &Value, x: &FeatureVector) -> f64 {
    let mut n = &tree["tree"];
    loop {
        if let Some(v) = n.get("leaf") {
            return tree["base_score"].as_f64().unwrap() + tree["learning_rate"].as_f64().unwrap() * v.as_f64().unwrap();
        }
        let f = n["feature"].as_u64().unwrap() as usize;
        n = if x[f] <= n["threshold"].as_f64().unwrap() { &n["left"] } else { &n["right"] };
    }
}

#[test]
fn predict_matches_tree_walk_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let m = random_tree(&mut rng, 5, false);
        let j = m.to_json();
        for _ in 0..50 {
            let mut x = random_features(&mut rng, false);
            // hit some thresholds exactly to exercise the tie rule
            if let Node::Split { feature, threshold, .. } = m.nodes[0] {
                if rng.gen_bool(0.2) {
                    x[feature] = threshold;
                }
            }
            let (s, p) = m.predict(&x);
            assert_eq!(s, json_oracle(&j, &x));
            assert_eq!(p, 1.0 / (1.0 + (-s).exp()));
        }
    }
}

#[test]
fn quantized_agrees_outside_one_step_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let band = 2f64.powi(-8);
    let (mut agreed, mut in_band) = (0, 0);
    for _ in 0..200 {
        let m = random_tree(&mut rng, 5, true);
        let tau = rng.gen_range(0.05..0.95);
        let q = quantize(&m, tau).unwrap();
        assert_eq!(q.internal_nodes(), m.internal_nodes());
        assert_eq!(q.depth(), m.depth());
        for _ in 0..200 {
            let x = random_features(&mut rng, true);
            let s = m.score(&x);
            let real_sig = s >= logit(tau);
            let (qs, q_sig, _) = q.predict(&quantize_features(&x));
            assert_eq!(m.leaf_index(&x), q.leaf_index(&quantize_features(&x)));
            assert!((qs.to_f64() - s).abs() <= 2f64.powi(-9));
            if (s - logit(tau)).abs() > band {
                assert_eq!(real_sig, q_sig, "score {s} tau {tau}");
                agreed += 1;
            } else {
                in_band += 1;
            }
        }
    }
    assert!(agreed > 30_000, "{agreed} {in_band}");
}

#[test]
fn probability_monotone_in_reached_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let mut m = random_tree(&mut rng, 5, false);
        let x = random_features(&mut rng, false);
        let leaf = m.leaf_index(&x);
        let mut last = m.predict(&x).1;
        for _ in 0..10 {
            let Node::Leaf { value } = &mut m.nodes[leaf] else { unreachable!() };
            *value += rng.gen_range(0.0..1.0);
            let p = m.predict(&x).1;
            assert!(p >= last);
            last = p;
        }
    }
}

#[test]
fn synthetic_support_follows_length_rule() {
    for seed in 0..400u64 {
        let class = if seed % 2 == 0 { Class::Signal } else { Class::Background };
        let t = synth_track(class, seed);
        let f = extract_features(&t);
        let support = f[..Y_PIXELS].iter().filter(|&&v| v > 0.0).count();
        let len = synth_length(t.pt);
        assert!(support >= 1 && support <= len.min(Y_PIXELS), "pt {} len {len} support {support}", t.pt);
        assert_eq!(t.is_signal(), class == Class::Signal);
        if t.pt > 8.0 {
            assert!(support <= 2);
        }
        if t.pt < 0.34 {
            // 1 + 8/pT > 24 pixels: covers the whole sensor wherever it is centred
            assert_eq!(support, Y_PIXELS);
        }
    }
}

#[test]
fn synthetic_trees_separate_classes() {
    let data = synth_dataset(10_000, 42);
    let (train, test) = split_dataset(&data, 0.8, 42).unwrap();
    let m = train_tree(&train, &TrainOptions::default()).unwrap();
    let probs: Vec<f64> = test.iter().map(|s| m.predict(&s.features).1).collect();
    let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
    let a = auc(&probs, &signal).unwrap();
    assert!(a > 0.75, "auc {a}");

    let thresholds: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    let sweep = threshold_sweep(&m, &test, &thresholds).unwrap();
    for w in sweep.windows(2) {
        assert!(w[1].signal_efficiency <= w[0].signal_efficiency);
        assert!(w[1].background_rejection >= w[0].background_rejection);
    }
    assert!(sweep.iter().any(|r| r.signal_efficiency >= 0.95 && r.background_rejection > 0.0));
    for r in &sweep {
        assert_eq!(r.n_signal + r.n_background, test.len());
    }

    // same with the quantized model, evaluated through the decision path
    let q = quantize(&m, 0.5).unwrap();
    let qr = evaluate(&q, &test, 0.5).unwrap();
    let rr = evaluate(&m, &test, 0.5).unwrap();
    assert!((qr.signal_efficiency - rr.signal_efficiency).abs() < 0.01);
}

#[test]
fn efficiency_is_reported_for_signal_not_background() {
    // signal and background each kept or discarded by a trivial split on y0
    let mk = |y0: f64, pt: f64| {
        let mut features = [0.0; N_FEATURES];
        features[13] = y0;
        Sample { features, pt }
    };
    let test = vec![mk(-1.0, 5.0), mk(-1.0, 5.0), mk(-1.0, 1.0), mk(1.0, 1.0)];
    let m = TreeModel {
        base_score: 0.0,
        learning_rate: 1.0,
        nodes: vec![
            Node::Split { feature: 13, threshold: 0.0, left: 1, right: 2 },
            Node::Leaf { value: 2.0 },
            Node::Leaf { value: -2.0 },
        ],
    };
    let r = evaluate(&m, &test, 0.5).unwrap();
    assert_eq!((r.n_signal, r.n_background), (2, 2));
    assert_eq!((r.signal_efficiency, r.background_rejection), (1.0, 0.5));
}

#[test]
fn random_labels_give_chance_auc() {
    let data = synth_dataset(6000, 7);
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let shuffled: Vec<Sample> = data
            .iter()
            .map(|s| Sample { features: s.features, pt: if rng.gen_bool(0.5) { 1.0 } else { 5.0 } })
            .collect();
        let (train, test) = split_dataset(&shuffled, 0.8, seed).unwrap();
        let m = train_tree(&train, &TrainOptions::default()).unwrap();
        let probs: Vec<f64> = test.iter().map(|s| m.predict(&s.features).1).collect();
        let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
        let a = auc(&probs, &signal).unwrap();
        assert!((a - 0.5).abs() < 0.05, "seed {seed} auc {a}");
        let mean = probs.iter().sum::<f64>() / probs.len() as f64;
        let sd = (probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / probs.len() as f64).sqrt();
        // held-out probabilities hug the prior
        assert!(sd < 0.02, "seed {seed} sd {sd}");
    }
}

#[test]
fn auc_matches_pair_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = 200;
        let probs: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..20) as f64) / 20.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if probs[i] > probs[j] { 1.0 } else if probs[i] == probs[j] { 0.5 } else { 0.0 };
                }
            }
        }
        assert!((auc(&probs, &labels).unwrap() - wins / pairs).abs() < 1e-12);
    }
}

#[test]
fn track_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("efab-ml-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let tracks: Vec<Track> = (0..5).map(|i| synth_track(if i % 2 == 0 { Class::Signal } else { Class::Background }, i)).collect();
    for name in ["t.txt", "t.txt.gz"] {
        let p = dir.join(name);
        assert_eq!(write_tracks(&p, tracks.clone()).unwrap(), 5);
        let back = read_samples(&p).unwrap();
        let want: Vec<Sample> = tracks.iter().map(Sample::of).collect();
        assert_eq!(back, want);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn quantized_threshold_follows_logit() {
    let m = TreeModel::leaf(0.0, 0.1, 0.0);
    for tau in [0.4922, 0.4953, 0.5, 0.9] {
        let q = quantize(&m, tau).unwrap();
        assert!((q.score_threshold.to_f64() - logit(tau)).abs() <= 2f64.powi(-10));
        assert!((sigmoid(logit(tau)) - tau).abs() < 1e-12);
    }
    // 0.4922 sits 0.0312 below zero in score space: -15.97 steps rounds to -16
    assert_eq!(quantize(&m, 0.4922).unwrap().score_threshold.raw(), -16);
}

proptest! {
    #[test]
    fn feature_sums_conserve_charge(seed in any::<u64>(), density in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let charge: Vec<f32> = (0..CHARGE_LEN)
            .map(|_| if rng.gen_bool(density) { rng.gen_range(0.0f32..100.0) } else { 0.0 })
            .collect();
        let t = Track::new(charge, 0.25, 3.0).unwrap();
        let f = extract_features(&t);
        let sum: f64 = f[..Y_PIXELS].iter().sum();
        prop_assert!((sum - t.total_charge()).abs() <= 1e-9 * t.total_charge().max(1.0));
        prop_assert!(f[..Y_PIXELS].iter().all(|&v| v >= 0.0));
        prop_assert_eq!(f[13], 0.25);
    }

    #[test]
    fn export_import_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_tree(&mut rng, 5, false);
        let back = TreeModel::import(&m.export()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.export(), m.export());
    }

    #[test]
    fn evaluate_bounds(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_tree(&mut rng, 3, false);
        let test: Vec<Sample> = (0..50)
            .map(|i| Sample { features: random_features(&mut rng, false), pt: if i % 3 == 0 { 1.0 } else { 4.0 } })
            .collect();
        let r = evaluate(&m, &test, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.signal_efficiency));
        prop_assert!((0.0..=1.0).contains(&r.background_rejection));
        prop_assert_eq!(r.n_signal + r.n_background, 50);
    }
}

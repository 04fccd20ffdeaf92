// SPDX-License-Identifier: Apache-2.0

//! Models output the probability that a track is signal (pT above the cut).
//! A track is kept as signal when that probability reaches the threshold
//! and rejected as background below it. Signal efficiency is the fraction
//! of true signal kept, background rejection the fraction of true
//! background rejected.

use std::fmt;
use std::fmt::Write as _;

use crate::dataset::Sample;
use crate::quant::{quantize_features, QuantTreeModel};
use crate::tree::TreeModel;
use crate::MlError;

pub trait Classifier {
    /// Probability that the sample is signal.
    fn probability(&self, sample: &Sample) -> f64;
}

impl Classifier for TreeModel {
    fn probability(&self, sample: &Sample) -> f64 {
        self.predict(&sample.features).1
    }
}

impl Classifier for QuantTreeModel {
    fn probability(&self, sample: &Sample) -> f64 {
        self.predict(&quantize_features(&sample.features)).2
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub signal_efficiency: f64,
    pub background_rejection: f64,
    pub threshold: f64,
    pub n_signal: usize,
    pub n_background: usize,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>10}", "threshold", format!("{:.4}", self.threshold))?;
        writeln!(f, "{:<22} {:>9.2}%", "signal efficiency", 100.0 * self.signal_efficiency)?;
        writeln!(f, "{:<22} {:>9.2}%", "background rejection", 100.0 * self.background_rejection)?;
        writeln!(f, "{:<22} {:>10}", "signal tracks", self.n_signal)?;
        writeln!(f, "{:<22} {:>10}", "background tracks", self.n_background)
    }
}

/// (signal, background) counts.
fn counts(signal: &[bool]) -> Result<(usize, usize), MlError> {
    if signal.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let n = signal.iter().filter(|&&s| s).count();
    if n == 0 || n == signal.len() {
        return Err(MlError::SingleClassDataset);
    }
    Ok((n, signal.len() - n))
}

/// Metrics for precomputed probabilities.
pub fn evaluate_probabilities(probs: &[f64], signal: &[bool], threshold: f64) -> Result<EvalReport, MlError> {
    let (n_signal, n_background) = counts(signal)?;
    let mut kept = 0;
    let mut rejected = 0;
    for (&p, &is_signal) in probs.iter().zip(signal) {
        match (is_signal, p >= threshold) {
            (true, true) => kept += 1,
            (false, false) => rejected += 1,
            _ => {}
        }
    }
    Ok(EvalReport {
        signal_efficiency: kept as f64 / n_signal as f64,
        background_rejection: rejected as f64 / n_background as f64,
        threshold,
        n_signal,
        n_background,
    })
}

pub fn evaluate(model: &dyn Classifier, test: &[Sample], threshold: f64) -> Result<EvalReport, MlError> {
    let probs: Vec<f64> = test.iter().map(|s| model.probability(s)).collect();
    let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
    evaluate_probabilities(&probs, &signal, threshold)
}

pub fn threshold_sweep(model: &dyn Classifier, test: &[Sample], thresholds: &[f64]) -> Result<Vec<EvalReport>, MlError> {
    let probs: Vec<f64> = test.iter().map(|s| model.probability(s)).collect();
    let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
    thresholds.iter().map(|&t| evaluate_probabilities(&probs, &signal, t)).collect()
}

/// Area under the ROC curve: the chance that a random signal track
/// outscores a random background track, ties counting one half
/// (Mann-Whitney U).
pub fn auc(probs: &[f64], signal: &[bool]) -> Result<f64, MlError> {
    let (n_sig, n_bg) = counts(signal)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| signal[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_sig * (n_sig + 1)) as f64 / 2.0;
    Ok(u / (n_sig as f64 * n_bg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub signal_efficiency: f64,
    pub background_rejection: f64,
}

/// One point per distinct probability plus the two end points.
pub fn roc_curve(probs: &[f64], signal: &[bool]) -> Result<Vec<RocPoint>, MlError> {
    counts(signal)?;
    let mut cuts: Vec<f64> = probs.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(f64::INFINITY);
    cuts.iter()
        .map(|&t| {
            let r = evaluate_probabilities(probs, signal, t)?;
            Ok(RocPoint { threshold: t, signal_efficiency: r.signal_efficiency, background_rejection: r.background_rejection })
        })
        .collect()
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from("threshold,signal_efficiency,background_rejection\n");
    for p in points {
        let _ = writeln!(s, "{},{:.6},{:.6}", p.threshold, p.signal_efficiency, p.background_rejection);
    }
    s
}

/// Background rejection against signal efficiency as a standalone SVG.
pub fn roc_svg(points: &[RocPoint], title: &str) -> String {
    let (w, h, m) = (480.0, 400.0, 50.0);
    let x = |e: f64| m + e * (w - 2.0 * m);
    let y = |r: f64| h - m - r * (h - 2.0 * m);
    let mut path = String::new();
    for (i, p) in points.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(p.signal_efficiency), y(p.background_rejection));
    }
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>", w / 2.0, escape(title));
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let _ = writeln!(s, "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>", x(v), y(0.0), x(v), y(1.0));
        let _ = writeln!(s, "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>", x(0.0), y(v), x(1.0), y(v));
        if k % 2 == 0 {
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.1}</text>", x(v), y(0.0) + 16.0);
            let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>", x(0.0) - 6.0, y(v) + 4.0);
        }
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">signal efficiency</text>", w / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">background rejection</text>",
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(s, "<path d=\"{}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\"/>", path.trim_end());
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_thresholds() {
        let probs = [0.1, 0.4, 0.6, 0.9];
        let signal = [false, true, false, true];
        let all_sig = evaluate_probabilities(&probs, &signal, 0.0).unwrap();
        assert_eq!((all_sig.signal_efficiency, all_sig.background_rejection), (1.0, 0.0));
        let all_bg = evaluate_probabilities(&probs, &signal, 1.0 + 1e-9).unwrap();
        assert_eq!((all_bg.signal_efficiency, all_bg.background_rejection), (0.0, 1.0));
        assert!(matches!(evaluate_probabilities(&probs, &[true; 4], 0.5), Err(MlError::SingleClassDataset)));
    }

    #[test]
    fn auc_reference_values() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        // one inversion out of four pairs
        assert_eq!(auc(&[0.1, 0.6, 0.5, 0.9], &[false, false, true, true]).unwrap(), 0.75);
    }

    #[test]
    fn roc_outputs() {
        let pts = roc_curve(&[0.2, 0.7, 0.7], &[false, true, false]).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].signal_efficiency, 1.0);
        assert_eq!(pts.last().unwrap().background_rejection, 1.0);
        let csv = roc_csv(&pts);
        assert_eq!(csv.lines().count(), 4);
        let svg = roc_svg(&pts, "a < b");
        assert!(svg.starts_with("<svg") && svg.contains("a &lt; b"));
    }
}

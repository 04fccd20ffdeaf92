// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// Switching activity since reset. Dynamic energy is modeled as
/// proportional to toggles, so power is proportional to toggles x frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivityReport {
    pub cycles: u64,
    pub toggles: u64,
    /// Flip-flop and accumulator bit changes at clock edges.
    pub register_toggles: u64,
    /// Wire and LUT output changes between consecutive settles.
    pub net_toggles: u64,
    pub toggles_per_cycle_mean: f64,
}

impl ActivityReport {
    pub fn new(cycles: u64, net_toggles: u64, register_toggles: u64) -> Self {
        let toggles = net_toggles + register_toggles;
        ActivityReport {
            cycles,
            toggles,
            register_toggles,
            net_toggles,
            toggles_per_cycle_mean: toggles as f64 / cycles as f64,
        }
    }

    /// Modeled power in watts at `freq_hz`, given the energy of one toggle in joules.
    pub fn power(&self, freq_hz: f64, joules_per_toggle: f64) -> f64 {
        self.toggles_per_cycle_mean * freq_hz * joules_per_toggle
    }

    /// Text table of modeled power over a frequency sweep (MHz).
    pub fn power_table(&self, freqs_mhz: &[f64], joules_per_toggle: f64) -> String {
        let mut s = format!("{:>10}  {:>14}\n", "f [MHz]", "P [uW]");
        for &f in freqs_mhz {
            let p = self.power(f * 1e6, joules_per_toggle);
            s += &format!("{:>10.1}  {:>14.6}\n", f, p * 1e6);
        }
        s
    }
}

impl fmt::Display for ActivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>12}", "cycles", self.cycles)?;
        writeln!(f, "{:<22} {:>12}", "register toggles", self.register_toggles)?;
        writeln!(f, "{:<22} {:>12}", "net toggles", self.net_toggles)?;
        writeln!(f, "{:<22} {:>12}", "total toggles", self.toggles)?;
        write!(f, "{:<22} {:>12.4}", "toggles / cycle", self.toggles_per_cycle_mean)
    }
}

/// Ordinary least-squares line through `(x, y)` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit { slope, intercept, r_squared })
}

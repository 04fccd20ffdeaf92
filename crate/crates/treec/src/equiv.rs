// SPDX-License-Identifier: Apache-2.0

//! Differential check of a compiled tree against the quantized model. One
//! vector enters per clock; its outputs are read `pipeline_depth` clocks
//! later.

use std::fmt;

use efab_core::cad::{NetlistSim, PortMap};
use efab_core::sim::FabricState;
use efab_ml::{Fixed, QuantTreeModel, N_FEATURES};

use crate::compile::CompiledTree;
use crate::TreecError;

pub type Vector = [Fixed; N_FEATURES];

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub index: usize,
    pub features: Vector,
    /// (score, decision) from the software model.
    pub expected: (Fixed, bool),
    pub netlist: (Fixed, bool),
    pub fabric: Option<(Fixed, bool)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EquivalenceReport {
    pub vectors: usize,
    pub mismatches: usize,
    pub fabric_checked: bool,
    pub first_counterexample: Option<Counterexample>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vectors     {}", self.vectors)?;
        writeln!(f, "mismatches  {}", self.mismatches)?;
        writeln!(f, "targets     netlist{}", if self.fabric_checked { " + fabric" } else { "" })?;
        if let Some(c) = &self.first_counterexample {
            let raws: Vec<String> = c.features.iter().map(|x| x.raw().to_string()).collect();
            writeln!(f, "first counterexample: vector {} [{}]", c.index, raws.join(" "))?;
            writeln!(f, "  expected score {} decision {}", c.expected.0.raw(), c.expected.1 as u8)?;
            writeln!(f, "  netlist  score {} decision {}", c.netlist.0.raw(), c.netlist.1 as u8)?;
            if let Some((s, d)) = c.fabric {
                writeln!(f, "  fabric   score {} decision {}", s.raw(), d as u8)?;
            }
        }
        Ok(())
    }
}

/// Compares the netlist simulation, and the fabric when given, with
/// `model` on every vector. Features must fit the compiled bus width.
pub fn equivalence_check(
    compiled: &CompiledTree,
    model: &QuantTreeModel,
    vectors: &[Vector],
    mut fabric: Option<(&mut FabricState, &PortMap)>,
) -> Result<EquivalenceReport, TreecError> {
    let mut report = EquivalenceReport { vectors: vectors.len(), fabric_checked: fabric.is_some(), ..Default::default() };
    if vectors.is_empty() {
        return Ok(report);
    }
    let mut sim = NetlistSim::new(&compiled.netlist)?;
    let mut frame = None;
    if let Some((fab, _)) = fabric.as_mut() {
        fab.reset();
        frame = Some(fab.io_frame());
    }
    let lag = compiled.pipeline_depth;
    let mut bits = Vec::new();
    for t in 0..vectors.len() + lag {
        if t < vectors.len() {
            bits = compiled.input_bits(&vectors[t])?;
        }
        let got_nl = compiled.decode_outputs(&sim.step(&bits));
        let got_fab = match (fabric.as_mut(), frame.as_mut()) {
            (Some((fab, ports)), Some(fr)) => {
                ports.drive(&bits, fr);
                Some(compiled.decode_outputs(&ports.read(&fab.step(fr))))
            }
            _ => None,
        };
        let Some(k) = t.checked_sub(lag) else { continue };
        let (score, decision, _) = model.predict(&vectors[k]);
        let expected = (score, decision);
        if got_nl != expected || got_fab.is_some_and(|g| g != expected) {
            report.mismatches += 1;
            if report.first_counterexample.is_none() {
                report.first_counterexample =
                    Some(Counterexample { index: k, features: vectors[k], expected, netlist: got_nl, fabric: got_fab });
            }
        }
    }
    Ok(report)
}

/// Random vectors aimed at the model's split points: each feature is a
/// threshold of that feature offset by at most two steps, a small value,
/// or uniform over the bus, in equal shares.
pub fn stimulus(model: &QuantTreeModel, width: usize, n: usize, seed: u64) -> Vec<Vector> {
    use efab_ml::QuantNode;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cuts: Vec<Vec<i64>> = vec![Vec::new(); N_FEATURES];
    for node in &model.nodes {
        if let QuantNode::Split { feature, threshold, .. } = *node {
            cuts[feature].push(threshold.raw() as i64);
        }
    }
    let (lo, hi) = (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1);
    (0..n)
        .map(|_| {
            std::array::from_fn(|f| {
                let raw = match rng.gen_range(0..3) {
                    0 if !cuts[f].is_empty() => cuts[f][rng.gen_range(0..cuts[f].len())] + rng.gen_range(-2..=2),
                    1 => rng.gen_range(-(64 << 9)..(64 << 9)),
                    _ => rng.gen_range(lo..=hi),
                };
                Fixed::from_raw(raw.clamp(lo, hi) as i32).unwrap()
            })
        })
        .collect()
}

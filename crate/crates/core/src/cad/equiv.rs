// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::PortMap;
use super::netlist::{Netlist, NetlistError};
use super::netlist_sim::NetlistSim;
use crate::sim::FabricState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivReport {
    pub cycles: u64,
    pub mismatches: u64,
    /// Cycle and output port of the first difference.
    pub first_mismatch: Option<(u64, String)>,
}

/// Drives the netlist and the loaded fabric with the same random input
/// frames from reset and compares every output on every cycle.
pub fn random_equivalence(
    netlist: &Netlist,
    fabric: &mut FabricState,
    ports: &PortMap,
    cycles: u64,
    seed: u64,
) -> Result<EquivReport, NetlistError> {
    let mut golden = NetlistSim::new(netlist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = fabric.io_frame();
    let mut report = EquivReport { cycles, mismatches: 0, first_mismatch: None };
    let mut inputs = vec![false; ports.inputs.len()];
    for cycle in 0..cycles {
        inputs.iter_mut().for_each(|b| *b = rng.gen());
        ports.drive(&inputs, &mut frame);
        let want = golden.step(&inputs);
        let got = ports.read(&fabric.step(&frame));
        if want != got {
            report.mismatches += 1;
            if report.first_mismatch.is_none() {
                let i = want.iter().zip(&got).position(|(a, b)| a != b).unwrap();
                report.first_mismatch = Some((cycle, ports.outputs[i].0.clone()));
            }
        }
    }
    Ok(report)
}

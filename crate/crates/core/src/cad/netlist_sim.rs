// SPDX-License-Identifier: Apache-2.0

use super::netlist::{CellId, CellKind, NetId, Netlist, NetlistError};
use crate::arch::DSP_OPERAND_BITS;
use crate::sim::{dsp_mac, eval_lut4};

/// Golden functional model of a netlist with the fabric's two-phase
/// semantics: settle, sample outputs, then clock all state at once.
#[derive(Clone, Debug)]
pub struct NetlistSim<'a> {
    netlist: &'a Netlist,
    order: Vec<CellId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    dffs: Vec<(NetId, NetId)>,
    dsps: Vec<(CellId, u32)>,
    values: Vec<bool>,
    cycle: u64,
}

impl<'a> NetlistSim<'a> {
    pub fn new(netlist: &'a Netlist) -> Result<Self, NetlistError> {
        netlist.validate()?;
        let order = netlist.comb_order()?;
        let port_net = |c: CellId| {
            let cell = netlist.cell(c);
            match cell.kind {
                CellKind::InPort => cell.outputs[0],
                _ => cell.inputs[0].unwrap(),
            }
        };
        let mut dffs = Vec::new();
        let mut dsps = Vec::new();
        for id in netlist.cell_ids() {
            let c = netlist.cell(id);
            match c.kind {
                CellKind::Dff => dffs.push((c.outputs[0], c.inputs[0].unwrap())),
                CellKind::DspMac => dsps.push((id, 0)),
                _ => {}
            }
        }
        let mut values = vec![false; netlist.nets().len()];
        for id in netlist.cell_ids() {
            if let CellKind::Const(b) = netlist.cell(id).kind {
                values[netlist.cell(id).outputs[0].0 as usize] = b;
            }
        }
        Ok(NetlistSim {
            netlist,
            order,
            inputs: netlist.inputs().into_iter().map(port_net).collect(),
            outputs: netlist.outputs().into_iter().map(port_net).collect(),
            dffs,
            dsps,
            values,
            cycle: 0,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn v(&self, n: NetId) -> bool {
        self.values[n.0 as usize]
    }

    fn settle(&mut self, inputs: &[bool]) {
        assert_eq!(inputs.len(), self.inputs.len(), "one value per input port");
        for (&n, &v) in self.inputs.iter().zip(inputs) {
            self.values[n.0 as usize] = v;
        }
        for &id in &self.order {
            let cell = self.netlist.cell(id);
            let CellKind::Lut4 { truth_table } = cell.kind else { unreachable!() };
            let idx = cell.inputs.iter().enumerate().fold(0u8, |a, (i, n)| a | (self.v(n.unwrap()) as u8) << i);
            self.values[cell.outputs[0].0 as usize] = eval_lut4(truth_table, idx);
        }
    }

    fn sample(&self) -> Vec<bool> {
        self.outputs.iter().map(|&n| self.v(n)).collect()
    }

    /// Outputs for `inputs` in the current state, without clocking.
    pub fn peek(&mut self, inputs: &[bool]) -> Vec<bool> {
        self.settle(inputs);
        self.sample()
    }

    /// One clock cycle; `inputs` follow [`Netlist::inputs`] order and the
    /// result follows [`Netlist::outputs`] order.
    pub fn step(&mut self, inputs: &[bool]) -> Vec<bool> {
        self.settle(inputs);
        let out = self.sample();
        let next: Vec<(NetId, bool)> = self.dffs.iter().map(|&(q, d)| (q, self.v(d))).collect();
        let mut accs = Vec::with_capacity(self.dsps.len());
        for &(id, acc) in &self.dsps {
            let cell = self.netlist.cell(id);
            let word = |pins: &[Option<NetId>]| {
                pins.iter().enumerate().fold(0u8, |a, (i, n)| a | (self.v(n.unwrap()) as u8) << i)
            };
            let a = word(&cell.inputs[..DSP_OPERAND_BITS]);
            let b = word(&cell.inputs[DSP_OPERAND_BITS..2 * DSP_OPERAND_BITS]);
            let base = if self.v(cell.inputs[2 * DSP_OPERAND_BITS].unwrap()) { 0 } else { acc };
            accs.push(dsp_mac(a, b, base));
        }
        for (q, v) in next {
            self.values[q.0 as usize] = v;
        }
        for (slot, acc) in self.dsps.iter_mut().zip(accs) {
            slot.1 = acc;
            let cell = self.netlist.cell(slot.0);
            for (bit, &n) in cell.outputs.iter().enumerate() {
                self.values[n.0 as usize] = acc >> bit & 1 != 0;
            }
        }
        self.cycle += 1;
        out
    }
}

/// Runs `trace` from reset and returns one output vector per cycle.
pub fn netlist_sim(netlist: &Netlist, trace: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, NetlistError> {
    let mut sim = NetlistSim::new(netlist)?;
    Ok(trace.iter().map(|inputs| sim.step(inputs)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cad::designs;

    #[test]
    fn and4() {
        let mut nl = Netlist::new("and4");
        let ins: Vec<NetId> = (0..4).map(|i| nl.add_input(&format!("i{i}"), None)).collect();
        let y = nl.add_lut("y", 0x8000, &ins);
        nl.add_output("y", y, None);
        let out = netlist_sim(&nl, &[vec![true; 4], vec![true, true, false, true]]).unwrap();
        assert_eq!(out, vec![vec![true], vec![false]]);
    }

    #[test]
    fn counter_counts() {
        let nl = designs::counter16();
        let mut sim = NetlistSim::new(&nl).unwrap();
        for k in 0..70_000u64 {
            let out = sim.step(&[]);
            let v = out.iter().enumerate().fold(0u64, |a, (i, &b)| a | (b as u64) << i);
            assert_eq!(v, k % 65536);
        }
    }

    #[test]
    fn deterministic() {
        let nl = designs::loopback32();
        let n = nl.inputs().len();
        let trace: Vec<Vec<bool>> = (0..200).map(|k| (0..n).map(|i| (k * 7 + i * 3) % 5 < 2).collect()).collect();
        assert_eq!(netlist_sim(&nl, &trace).unwrap(), netlist_sim(&nl, &trace).unwrap());
    }

    #[test]
    fn loop_is_an_error() {
        let mut nl = Netlist::new("loop");
        let n = nl.add_net("n");
        nl.add_lut_into("inv", 0x5555, &[n], n);
        assert!(matches!(NetlistSim::new(&nl), Err(NetlistError::CombinationalLoop(_))));
    }
}

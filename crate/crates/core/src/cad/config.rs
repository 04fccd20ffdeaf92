// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::netlist::{CellKind, NetId, Netlist};
use super::place::{Placement, Unit};
use super::route::RoutingResult;
use crate::arch::{dsp_input_location, PinSource, RoutingGrid, TileArch, DSP_INPUTS, LUT_INPUTS};
use crate::bitstream::{encode_bitstream, BitstreamError, FabricConfig};
use crate::fabric::{FabricLayout, TileCoord};
use crate::sim::{Bank, IoFrame, IoMap};

/// Pin mux selections keyed by (net, tile, sink).
type SinkMap = BTreeMap<(NetId, TileCoord, usize), PinSource>;

/// Builds per-tile payloads for a placed and routed design.
pub fn build_config(
    netlist: &Netlist,
    placement: &Placement,
    routing: &RoutingResult,
    layout: &FabricLayout,
) -> FabricConfig {
    let mut config = FabricConfig::zeroed(layout);
    let grid = RoutingGrid::new(layout);
    let mut sinks = SinkMap::new();
    for rn in &routing.nets {
        for &(tile, sink, src) in &rn.sinks {
            sinks.insert((rn.net, tile, sink), src);
        }
        for &(w, src) in &rn.wires {
            let wire = grid.wire(w);
            let arch = TileArch::of(layout.tile(wire.tile)).expect("wires leave routable tiles");
            arch.set_wire(config.get_mut(wire.tile).unwrap(), wire.side, wire.track, src);
        }
    }
    let select = |net: NetId, tile: TileCoord, sink: usize| -> PinSource {
        if let Some(b) = netlist.constant(net) {
            return PinSource::Const(b);
        }
        sinks[&(net, tile, sink)]
    };

    for (unit, site) in placement.units.iter().zip(&placement.sites) {
        let tile = site.tile;
        let arch = TileArch::of(layout.tile(tile)).unwrap();
        match *unit {
            Unit::Logic { lut, ff } => {
                let slot = site.index;
                let bits = config.get_mut(tile).unwrap();
                match lut {
                    Some(l) => {
                        let cell = netlist.cell(l);
                        let CellKind::Lut4 { truth_table } = cell.kind else { unreachable!() };
                        arch.set_lut_tt(bits, slot, truth_table);
                        for i in 0..LUT_INPUTS {
                            let sink = slot * LUT_INPUTS + i;
                            arch.set_pin(bits, sink, select(cell.inputs[i].unwrap(), tile, sink));
                        }
                    }
                    None => {
                        // pass-through LUT in front of a lone flip-flop
                        let d = netlist.cell(ff.unwrap()).inputs[0].unwrap();
                        arch.set_lut_tt(bits, slot, 0xAAAA);
                        let sink = slot * LUT_INPUTS;
                        arch.set_pin(bits, sink, select(d, tile, sink));
                    }
                }
                arch.set_ff_used(bits, slot, ff.is_some());
            }
            Unit::Dsp(c) => {
                let cell = netlist.cell(c);
                arch.set_mode(config.get_mut(tile).unwrap(), 1);
                for pin in 0..DSP_INPUTS {
                    let (dr, sink) = dsp_input_location(pin);
                    let t = TileCoord::new(tile.row + dr, tile.col);
                    let a = TileArch::of(layout.tile(t)).unwrap();
                    let src = select(cell.inputs[pin].unwrap(), t, sink);
                    a.set_pin(config.get_mut(t).unwrap(), sink, src);
                }
            }
            Unit::Output(c) => {
                let net = netlist.cell(c).inputs[0].unwrap();
                let src = select(net, tile, site.index);
                arch.set_pin(config.get_mut(tile).unwrap(), site.index, src);
            }
            Unit::Input(_) => {}
        }
    }
    config
}

/// Bitstream for a placed and routed design.
pub fn generate_config(
    netlist: &Netlist,
    placement: &Placement,
    routing: &RoutingResult,
    layout: &FabricLayout,
) -> Result<Vec<u8>, BitstreamError> {
    encode_bitstream(layout, &build_config(netlist, placement, routing, layout))
}

/// IO bank position of every netlist port, in [`Netlist::inputs`] and
/// [`Netlist::outputs`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortMap {
    pub inputs: Vec<(String, Bank, usize)>,
    pub outputs: Vec<(String, Bank, usize)>,
}

impl PortMap {
    pub fn new(netlist: &Netlist, placement: &Placement, layout: &FabricLayout) -> Self {
        let map = IoMap::new(layout);
        let locate = |c| {
            let site = placement.site_of(c).expect("ports are placed");
            let (bank, idx) = map.index_of(site.tile, site.index).unwrap();
            (netlist.cell(c).name.clone(), bank, idx)
        };
        PortMap {
            inputs: netlist.inputs().into_iter().map(locate).collect(),
            outputs: netlist.outputs().into_iter().map(locate).collect(),
        }
    }

    pub fn drive(&self, values: &[bool], frame: &mut IoFrame) {
        for (&(_, bank, idx), &v) in self.inputs.iter().zip(values) {
            frame.inputs_mut(bank)[idx] = v;
        }
    }

    pub fn read(&self, frame: &IoFrame) -> Vec<bool> {
        self.outputs.iter().map(|&(_, bank, idx)| frame.outputs(bank)[idx]).collect()
    }

    pub fn input(&self, name: &str) -> Option<(Bank, usize)> {
        self.inputs.iter().find(|p| p.0 == name).map(|p| (p.1, p.2))
    }

    pub fn output(&self, name: &str) -> Option<(Bank, usize)> {
        self.outputs.iter().find(|p| p.0 == name).map(|p| (p.1, p.2))
    }

    pub fn report(&self) -> String {
        let mut s = format!("{:<32} {:<4} {:<5} {:>5}\n", "port", "dir", "bank", "bit");
        for (dir, list) in [("in", &self.inputs), ("out", &self.outputs)] {
            for (name, bank, idx) in list {
                s += &format!("{:<32} {:<4} {:<5} {:>5}\n", name, dir, bank.name(), idx);
            }
        }
        s
    }
}

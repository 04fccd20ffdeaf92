// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate fabric simulator.
//!
//! A decoded configuration is compiled into a flat program: one node per
//! driven wire and per tile-local source, evaluated in topological order.
//! Each [`FabricState::step`] settles the combinational logic against the
//! presented inputs, samples the outputs, then clocks every flip-flop and
//! DSP accumulator at once.
//!
//! Tiles without a routing architecture (RegFile, W_IO, CPU_IO) carry no
//! configuration and are inert.

mod activity;
pub mod io;
mod vcd;

use std::fmt;

use thiserror::Error;

pub use activity::{linear_fit, ActivityReport, LinearFit};
pub use io::{Bank, IoFrame, IoMap};
pub use vcd::VcdTrace;

use crate::arch::{
    PinSource, RoutingGrid, Side, TileArch, WireId, WireSource, CHANNEL_WIDTH, DSP_ACC_BITS, DSP_ACC_PER_HALF,
    DSP_OPERAND_BITS, IO_PINS, LUT_INPUTS, LUT_SLOTS,
};
use crate::bitstream::{decode_bitstream, BitstreamError, FabricConfig};
use crate::fabric::{census, FabricLayout, TileCoord, TileKind};

const DSP_MASK: u32 = (1 << DSP_ACC_BITS) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
    #[error("combinational loop through {0}")]
    CombinationalLoop(String),
    #[error("invalid configuration at tile ({row},{col}): {reason}")]
    InvalidConfig { row: usize, col: usize, reason: String },
    #[error("no cycles have been run")]
    NoCyclesRun,
}

/// Bit `inputs` of the truth table; input 0 is the LSB of the index.
pub fn eval_lut4(truth_table: u16, inputs: u8) -> bool {
    truth_table >> (inputs & 0xF) & 1 != 0
}

/// Unsigned 8x8 multiply, accumulated modulo 2^20.
pub fn dsp_mac(a: u8, b: u8, acc: u32) -> u32 {
    (acc & DSP_MASK).wrapping_add(a as u32 * b as u32) & DSP_MASK
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(bool),
    Input(Bank, u32),
    Ff(u32),
    Acc { slice: u32, bit: u8 },
    Copy(u32),
    Lut(u16, [u32; LUT_INPUTS]),
}

impl Op {
    fn is_state(self) -> bool {
        matches!(self, Op::Ff(_) | Op::Acc { .. })
    }

    fn deps(&self) -> &[u32] {
        match self {
            Op::Copy(n) => std::slice::from_ref(n),
            Op::Lut(_, ins) => ins,
            _ => &[],
        }
    }
}

/// What a node physically is, for diagnostics.
#[derive(Clone, Copy, Debug)]
enum Label {
    Const,
    Wire(WireId),
    Source(TileCoord, usize),
    SlotLut(TileCoord, usize),
}

const CONST0: u32 = 0;
const CONST1: u32 = 1;

#[derive(Clone, Debug)]
struct Dsp {
    a: [u32; DSP_OPERAND_BITS],
    b: [u32; DSP_OPERAND_BITS],
    clr: u32,
}

/// A loaded, running fabric.
#[derive(Clone, Debug)]
pub struct FabricState {
    layout: FabricLayout,
    config: FabricConfig,
    grid: RoutingGrid,
    ops: Vec<Op>,
    labels: Vec<Label>,
    /// Source nodes first, then combinational nodes in topological order.
    schedule: Vec<u32>,
    /// Nodes whose changes count as net toggles.
    net_nodes: Vec<u32>,
    outputs: Vec<(Bank, u32, u32)>,
    ff_d: Vec<(u32, u32)>,
    dsps: Vec<Option<Dsp>>,
    routed: Vec<(WireId, u32)>,
    ff_values: Vec<bool>,
    dsp_accumulators: Vec<u32>,
    values: Vec<bool>,
    prev: Vec<bool>,
    io_template: IoFrame,
    cycle_count: u64,
    net_toggles: u64,
    register_toggles: u64,
    trace: Option<VcdTrace>,
}

/// Decodes `image` against `layout` and builds the reset state.
pub fn load(layout: &FabricLayout, image: &[u8]) -> Result<FabricState, SimError> {
    let config = decode_bitstream(image, layout)?;
    FabricState::from_config(layout, config)
}

struct Builder<'a> {
    layout: &'a FabricLayout,
    config: &'a FabricConfig,
    grid: RoutingGrid,
    ops: Vec<Op>,
    labels: Vec<Label>,
    /// First source node of each routable tile.
    local_base: Vec<u32>,
    wire_node: Vec<u32>,
}

impl<'a> Builder<'a> {
    fn alloc(&mut self, op: Op, label: Label) -> u32 {
        self.ops.push(op);
        self.labels.push(label);
        (self.ops.len() - 1) as u32
    }

    fn invalid(tile: TileCoord, reason: impl Into<String>) -> SimError {
        SimError::InvalidConfig { row: tile.row, col: tile.col, reason: reason.into() }
    }

    fn arch_bits(&self, tile: TileCoord) -> (TileArch, &'a crate::bitstream::ConfigBits) {
        let arch = TileArch::of(self.layout.tile(tile)).expect("routable tile has an architecture");
        let bits = self.config.get(tile).expect("decoded config covers every configurable tile");
        (arch, bits)
    }

    /// Node seen by a sink pin of `tile`.
    fn pin_node(&self, tile: TileCoord, sink: usize) -> Result<u32, SimError> {
        let (arch, bits) = self.arch_bits(tile);
        let src = arch.pin(bits, sink).map_err(|e| Self::invalid(tile, format!("pin {sink}: {e}")))?;
        self.resolve(tile, src)
    }

    fn resolve(&self, tile: TileCoord, src: PinSource) -> Result<u32, SimError> {
        match src {
            PinSource::Const(b) => Ok(if b { CONST1 } else { CONST0 }),
            PinSource::Local(k) => Ok(self.local_base[self.layout.index(tile)] + k as u32),
            PinSource::Incoming { side, track } => {
                let id = self
                    .grid
                    .incoming(tile, side, track)
                    .ok_or_else(|| Self::invalid(tile, format!("no wire arrives from {side:?} on track {track}")))?;
                // an undriven wire reads as 0
                Ok(self.wire_node[id.0 as usize])
            }
        }
    }
}

impl FabricState {
    pub fn from_config(layout: &FabricLayout, config: FabricConfig) -> Result<FabricState, SimError> {
        let grid = RoutingGrid::new(layout);
        let mut b = Builder {
            layout,
            config: &config,
            grid: grid.clone(),
            ops: Vec::new(),
            labels: Vec::new(),
            local_base: vec![u32::MAX; layout.rows() * layout.cols()],
            wire_node: vec![CONST0; grid.wire_slots()],
        };
        b.alloc(Op::Const(false), Label::Const);
        b.alloc(Op::Const(true), Label::Const);

        let io_map = IoMap::new(layout);
        let mut ff_count = 0u32;
        let mut slice_count = 0u32;
        let mut slice_of_top = std::collections::BTreeMap::new();

        // Pass 1: allocate every source and driven wire.
        for (tile, kind) in layout.tiles() {
            if !kind.is_routable() {
                continue;
            }
            let arch = TileArch::of(kind).unwrap();
            let base = b.ops.len() as u32;
            b.local_base[layout.index(tile)] = base;
            for k in 0..arch.sources {
                let op = match kind {
                    TileKind::Lut4ab => {
                        let ff = ff_count + k as u32;
                        if arch.ff_used(config.get(tile).unwrap(), k) {
                            Op::Ff(ff)
                        } else {
                            // rewritten to the LUT in pass 2
                            Op::Const(false)
                        }
                    }
                    TileKind::WestIo | TileKind::EastIo => {
                        let (bank, idx) = io_map.index_of(tile, k).unwrap();
                        Op::Input(bank, idx as u32)
                    }
                    TileKind::DspTop => Op::Acc { slice: slice_count, bit: k as u8 },
                    TileKind::DspBot => {
                        let slice = slice_of_top[&TileCoord::new(tile.row - 1, tile.col)];
                        Op::Acc { slice, bit: (DSP_ACC_PER_HALF + k) as u8 }
                    }
                    _ => unreachable!(),
                };
                b.alloc(op, Label::Source(tile, k));
            }
            match kind {
                TileKind::Lut4ab => ff_count += LUT_SLOTS as u32,
                TileKind::DspTop => {
                    slice_of_top.insert(tile, slice_count);
                    slice_count += 1;
                }
                _ => {}
            }
            let bits = config.get(tile).unwrap();
            for side in Side::ALL {
                for track in 0..CHANNEL_WIDTH {
                    let src = arch
                        .wire(bits, side, track)
                        .map_err(|e| Builder::invalid(tile, format!("wire {side:?}/{track}: {e}")))?;
                    if src == WireSource::Off {
                        continue;
                    }
                    let id = grid.wire_id(tile, side, track);
                    if !grid.exists(id) {
                        return Err(Builder::invalid(tile, format!("drives nonexistent wire {side:?}/{track}")));
                    }
                    b.wire_node[id.0 as usize] = b.alloc(Op::Const(false), Label::Wire(id));
                }
            }
        }

        // Pass 2: connect.
        let mut routed = Vec::new();
        let mut ff_d = Vec::new();
        let mut outputs = Vec::new();
        let mut dsps = vec![None; slice_count as usize];
        for (tile, kind) in layout.tiles() {
            if !kind.is_routable() {
                continue;
            }
            let (arch, bits) = b.arch_bits(tile);
            let base = b.local_base[layout.index(tile)];
            for side in Side::ALL {
                for track in 0..CHANNEL_WIDTH {
                    let id = grid.wire_id(tile, side, track);
                    let node = b.wire_node[id.0 as usize];
                    if node == CONST0 {
                        continue;
                    }
                    let src = match arch.wire(bits, side, track).unwrap() {
                        WireSource::Off => unreachable!(),
                        WireSource::Incoming(from) => b.resolve(tile, PinSource::Incoming { side: from, track })?,
                        WireSource::Local(k) => base + k as u32,
                    };
                    b.ops[node as usize] = Op::Copy(src);
                    routed.push((id, src));
                }
            }
            match kind {
                TileKind::Lut4ab => {
                    for slot in 0..LUT_SLOTS {
                        let tt = arch.lut_tt(bits, slot);
                        let ff = arch.ff_used(bits, slot);
                        let mut ins = [CONST0; LUT_INPUTS];
                        for (i, n) in ins.iter_mut().enumerate() {
                            *n = b.pin_node(tile, slot * LUT_INPUTS + i)?;
                        }
                        let lut = if tt == 0 { Op::Const(false) } else { Op::Lut(tt, ins) };
                        let out = base + slot as u32;
                        if ff {
                            let d = b.alloc(lut, Label::SlotLut(tile, slot));
                            let Op::Ff(idx) = b.ops[out as usize] else { unreachable!() };
                            ff_d.push((idx, d));
                        } else {
                            b.ops[out as usize] = lut;
                        }
                    }
                }
                TileKind::WestIo | TileKind::EastIo => {
                    for pin in 0..IO_PINS {
                        let node = b.pin_node(tile, pin)?;
                        if node != CONST0 {
                            let (bank, idx) = io_map.index_of(tile, pin).unwrap();
                            outputs.push((bank, idx as u32, node));
                        }
                    }
                }
                TileKind::DspTop => {
                    let mode = arch.mode(bits);
                    if mode & 0b10 != 0 {
                        return Err(Builder::invalid(tile, "signed DSP mode is not implemented"));
                    }
                    if mode & 1 != 0 {
                        let bot = TileCoord::new(tile.row + 1, tile.col);
                        let mut dsp = Dsp { a: [CONST0; 8], b: [CONST0; 8], clr: b.pin_node(bot, 0)? };
                        for i in 0..DSP_OPERAND_BITS {
                            dsp.a[i] = b.pin_node(tile, i)?;
                            dsp.b[i] = b.pin_node(tile, DSP_OPERAND_BITS + i)?;
                        }
                        dsps[slice_of_top[&tile] as usize] = Some(dsp);
                    }
                }
                _ => {}
            }
        }

        let Builder { ops, labels, .. } = b;
        let schedule = topo_order(&ops).map_err(|n| SimError::CombinationalLoop(describe(&grid, labels[n as usize])))?;
        let net_nodes = (2..ops.len() as u32).filter(|&n| !ops[n as usize].is_state()).collect();
        let c = census(layout);
        debug_assert_eq!(ff_count as usize, c.flip_flops);
        debug_assert_eq!(slice_count as usize, c.dsp_slices);
        let n = ops.len();
        let mut values = vec![false; n];
        values[CONST1 as usize] = true;
        Ok(FabricState {
            layout: layout.clone(),
            config,
            grid,
            ops,
            labels,
            schedule,
            net_nodes,
            outputs,
            ff_d,
            dsps,
            routed,
            ff_values: vec![false; c.flip_flops],
            dsp_accumulators: vec![0; c.dsp_slices],
            prev: values.clone(),
            values,
            io_template: IoFrame::new(layout),
            cycle_count: 0,
            net_toggles: 0,
            register_toggles: 0,
            trace: None,
        })
    }

    pub fn layout(&self) -> &FabricLayout {
        &self.layout
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycle_count
    }

    pub fn toggle_count(&self) -> u64 {
        self.net_toggles + self.register_toggles
    }

    pub fn ff_values(&self) -> &[bool] {
        &self.ff_values
    }

    pub fn dsp_accumulators(&self) -> &[u32] {
        &self.dsp_accumulators
    }

    /// Driven wires and the node feeding each, in tile order.
    pub fn routed_wires(&self) -> impl Iterator<Item = WireId> + '_ {
        self.routed.iter().map(|&(w, _)| w)
    }

    /// An all-zero frame sized for this layout.
    pub fn io_frame(&self) -> IoFrame {
        self.io_template.clone()
    }

    /// Starts recording outputs and flip-flops for a VCD dump.
    pub fn enable_trace(&mut self) {
        self.trace = Some(VcdTrace::new(&self.io_template, self.ff_d.iter().map(|&(i, _)| i as usize).collect()));
    }

    pub fn take_trace(&mut self) -> Option<VcdTrace> {
        self.trace.take()
    }

    /// Clears all state and counters, as after `load`.
    pub fn reset(&mut self) {
        self.ff_values.iter_mut().for_each(|v| *v = false);
        self.dsp_accumulators.iter_mut().for_each(|v| *v = 0);
        self.values.iter_mut().for_each(|v| *v = false);
        self.values[CONST1 as usize] = true;
        self.prev.clone_from(&self.values);
        self.cycle_count = 0;
        self.net_toggles = 0;
        self.register_toggles = 0;
    }

    fn settle(&mut self, io: &IoFrame) {
        for &n in &self.schedule {
            let v = match self.ops[n as usize] {
                Op::Const(b) => b,
                Op::Input(bank, i) => io.inputs(bank).get(i as usize).copied().unwrap_or(false),
                Op::Ff(i) => self.ff_values[i as usize],
                Op::Acc { slice, bit } => self.dsp_accumulators[slice as usize] >> bit & 1 != 0,
                Op::Copy(s) => self.values[s as usize],
                Op::Lut(tt, ins) => {
                    let idx = ins.iter().enumerate().fold(0u8, |a, (i, &s)| a | (self.values[s as usize] as u8) << i);
                    eval_lut4(tt, idx)
                }
            };
            self.values[n as usize] = v;
        }
    }

    fn sample(&self) -> IoFrame {
        let mut out = self.io_template.clone();
        for &(bank, idx, node) in &self.outputs {
            out.outputs_mut(bank)[idx as usize] = self.values[node as usize];
        }
        out
    }

    fn word(&self, nodes: &[u32]) -> u8 {
        nodes.iter().enumerate().fold(0u8, |a, (i, &n)| a | (self.values[n as usize] as u8) << i)
    }

    /// Outputs the fabric would present for `io` in the current state, without clocking.
    pub fn peek(&mut self, io: &IoFrame) -> IoFrame {
        self.settle(io);
        self.sample()
    }

    /// One clock cycle. The returned outputs are those settled before the edge.
    pub fn step(&mut self, io: &IoFrame) -> IoFrame {
        self.settle(io);
        for &n in &self.net_nodes {
            let n = n as usize;
            if self.values[n] != self.prev[n] {
                self.net_toggles += 1;
            }
        }
        self.prev.clone_from(&self.values);
        let out = self.sample();

        let mut next = Vec::with_capacity(self.ff_d.len());
        for &(ff, d) in &self.ff_d {
            next.push((ff as usize, self.values[d as usize]));
        }
        let mut next_acc = Vec::new();
        for (slice, dsp) in self.dsps.iter().enumerate() {
            if let Some(dsp) = dsp {
                let a = self.word(&dsp.a);
                let b = self.word(&dsp.b);
                let acc = if self.values[dsp.clr as usize] { 0 } else { self.dsp_accumulators[slice] };
                next_acc.push((slice, dsp_mac(a, b, acc)));
            }
        }
        for (ff, v) in next {
            if self.ff_values[ff] != v {
                self.register_toggles += 1;
                self.ff_values[ff] = v;
            }
        }
        for (slice, v) in next_acc {
            self.register_toggles += (self.dsp_accumulators[slice] ^ v).count_ones() as u64;
            self.dsp_accumulators[slice] = v;
        }
        if let Some(trace) = &mut self.trace {
            trace.record(self.cycle_count, &out, &self.ff_values);
        }
        self.cycle_count += 1;
        out
    }

    pub fn activity_report(&self) -> Result<ActivityReport, SimError> {
        if self.cycle_count == 0 {
            return Err(SimError::NoCyclesRun);
        }
        Ok(ActivityReport::new(self.cycle_count, self.net_toggles, self.register_toggles))
    }

    /// Human-readable name of node `n`, for diagnostics.
    pub fn describe_node(&self, n: usize) -> String {
        describe(&self.grid, self.labels[n])
    }
}

fn describe(grid: &RoutingGrid, label: Label) -> String {
    match label {
        Label::Const => "constant".into(),
        Label::Wire(id) => {
            let w = grid.wire(id);
            format!("wire ({},{}) {:?} track {}", w.tile.row, w.tile.col, w.side, w.track)
        }
        Label::Source(t, k) => format!("source {k} of tile ({},{})", t.row, t.col),
        Label::SlotLut(t, k) => format!("LUT of slot {k} in tile ({},{})", t.row, t.col),
    }
}

/// Sources first, then Kahn order over combinational nodes. On a cycle,
/// returns a node on it.
fn topo_order(ops: &[Op]) -> Result<Vec<u32>, u32> {
    let n = ops.len();
    let mut indeg = vec![0u32; n];
    let mut fanout: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    for (i, op) in ops.iter().enumerate() {
        for &d in op.deps() {
            indeg[i] += 1;
            fanout[d as usize].push(i as u32);
        }
    }
    let mut ready: Vec<u32> = (0..n as u32).filter(|&i| indeg[i as usize] == 0).collect();
    ready.reverse();
    while let Some(i) = ready.pop() {
        order.push(i);
        for &f in &fanout[i as usize] {
            indeg[f as usize] -= 1;
            if indeg[f as usize] == 0 {
                ready.push(f);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap();
        return Err(stuck as u32);
    }
    Ok(order)
}

impl fmt::Display for FabricState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fabric {}: {} nodes, {} driven wires, {} used FFs, cycle {}",
            self.layout.name(),
            self.ops.len(),
            self.routed.len(),
            self.ff_d.len(),
            self.cycle_count
        )
    }
}

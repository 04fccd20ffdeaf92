// SPDX-License-Identifier: Apache-2.0

//! Routing architecture and per-tile configuration layout.
//!
//! Every routable tile owns a switch matrix. For each of its four sides it
//! drives [`CHANNEL_WIDTH`] single-length wires into the neighbouring tile.
//! A wire mux picks its driver from the same track arriving on one of the
//! other three sides (a disjoint switch box, no U-turns) or from any local
//! source of the tile. Every sink pin (LUT input, IO output, DSP operand)
//! has a mux over the two constants, all incoming wires, and the tile's own
//! local sources.
//!
//! The simulator, the router and the configuration generator all go through
//! this module, so it is the single definition of what a bitstream means.

use thiserror::Error;

use crate::bitstream::ConfigBits;
use crate::fabric::{FabricLayout, TileCoord, TileKind};

/// Tracks per side per direction.
pub const CHANNEL_WIDTH: usize = 32;
/// LUT4 + FF slots per LUT4AB tile.
pub const LUT_SLOTS: usize = 8;
pub const LUT_INPUTS: usize = 4;
/// Input and output pins per WEST_IO / EAST_IO tile.
pub const IO_PINS: usize = 32;
pub const DSP_OPERAND_BITS: usize = 8;
pub const DSP_ACC_BITS: usize = 20;
/// Accumulator bits sourced by each half of a DSP pair.
pub const DSP_ACC_PER_HALF: usize = DSP_ACC_BITS / 2;
/// DspMac cell input pins: a[0..8], b[0..8], clr.
pub const DSP_INPUTS: usize = 2 * DSP_OPERAND_BITS + 1;
pub const DSP_CLR_PIN: usize = 2 * DSP_OPERAND_BITS;

const LUT_TT_BITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    North,
    East,
    South,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::North, Side::East, Side::South, Side::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::North => Side::South,
            Side::East => Side::West,
            Side::South => Side::North,
            Side::West => Side::East,
        }
    }

    /// (row, col) step toward this side.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Side::North => (-1, 0),
            Side::East => (0, 1),
            Side::South => (1, 0),
            Side::West => (0, -1),
        }
    }

    /// The three sides a wire leaving toward `self` may be fed from, in mux order.
    pub fn feeders(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |&s| s != self)
    }
}

fn bits_for(options: usize) -> usize {
    (usize::BITS - (options - 1).leading_zeros()) as usize
}

/// Driver of a sink pin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PinSource {
    Const(bool),
    /// The wire arriving at this tile from `side` on `track`.
    Incoming { side: Side, track: usize },
    Local(usize),
}

/// Driver of an outgoing wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WireSource {
    Off,
    /// Same track, arriving from `side`.
    Incoming(Side),
    Local(usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("select value {value} exceeds {options} options")]
    OutOfRange { value: u64, options: usize },
}

/// Configuration layout of one tile kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileArch {
    pub kind: TileKind,
    /// Signals produced inside the tile (slot outputs, IO inputs, accumulator bits).
    pub sources: usize,
    /// Pins consuming a routed signal.
    pub sinks: usize,
    pub mode_bits: usize,
    pub pin_bits: usize,
    pub wire_bits: usize,
}

impl TileArch {
    pub fn of(kind: TileKind) -> Option<TileArch> {
        let (sources, sinks, mode_bits) = match kind {
            TileKind::Lut4ab => (LUT_SLOTS, LUT_SLOTS * LUT_INPUTS, 0),
            TileKind::WestIo | TileKind::EastIo => (IO_PINS, IO_PINS, 0),
            // bit 0 enables the MAC; bit 1 is reserved for a signed mode
            TileKind::DspTop => (DSP_ACC_PER_HALF, 2 * DSP_OPERAND_BITS, 2),
            TileKind::DspBot => (DSP_ACC_PER_HALF, 1, 0),
            _ => return None,
        };
        Some(TileArch {
            kind,
            sources,
            sinks,
            mode_bits,
            pin_bits: bits_for(Self::pin_options(sources)),
            wire_bits: bits_for(Self::wire_options(sources)),
        })
    }

    fn pin_options(sources: usize) -> usize {
        2 + 4 * CHANNEL_WIDTH + sources
    }

    fn wire_options(sources: usize) -> usize {
        4 + sources
    }

    fn slot_stride(&self) -> usize {
        LUT_TT_BITS + 1 + LUT_INPUTS * self.pin_bits
    }

    fn wires_offset(&self) -> usize {
        match self.kind {
            TileKind::Lut4ab => LUT_SLOTS * self.slot_stride(),
            _ => self.mode_bits + self.sinks * self.pin_bits,
        }
    }

    pub fn config_width(&self) -> usize {
        self.wires_offset() + 4 * CHANNEL_WIDTH * self.wire_bits
    }

    pub fn lut_offset(&self, slot: usize) -> usize {
        debug_assert_eq!(self.kind, TileKind::Lut4ab);
        slot * self.slot_stride()
    }

    pub fn ff_offset(&self, slot: usize) -> usize {
        self.lut_offset(slot) + LUT_TT_BITS
    }

    pub fn pin_offset(&self, sink: usize) -> usize {
        match self.kind {
            TileKind::Lut4ab => {
                let (slot, pin) = (sink / LUT_INPUTS, sink % LUT_INPUTS);
                self.ff_offset(slot) + 1 + pin * self.pin_bits
            }
            _ => self.mode_bits + sink * self.pin_bits,
        }
    }

    pub fn wire_offset(&self, side: Side, track: usize) -> usize {
        self.wires_offset() + (side.index() * CHANNEL_WIDTH + track) * self.wire_bits
    }

    pub fn encode_pin(&self, src: PinSource) -> u64 {
        match src {
            PinSource::Const(b) => b as u64,
            PinSource::Incoming { side, track } => (2 + side.index() * CHANNEL_WIDTH + track) as u64,
            PinSource::Local(k) => {
                debug_assert!(k < self.sources);
                (2 + 4 * CHANNEL_WIDTH + k) as u64
            }
        }
    }

    pub fn decode_pin(&self, value: u64) -> Result<PinSource, SelectError> {
        let options = Self::pin_options(self.sources);
        let v = value as usize;
        if v >= options {
            return Err(SelectError::OutOfRange { value, options });
        }
        Ok(match v {
            0 | 1 => PinSource::Const(v == 1),
            v if v < 2 + 4 * CHANNEL_WIDTH => {
                let w = v - 2;
                PinSource::Incoming { side: Side::ALL[w / CHANNEL_WIDTH], track: w % CHANNEL_WIDTH }
            }
            v => PinSource::Local(v - 2 - 4 * CHANNEL_WIDTH),
        })
    }

    pub fn encode_wire(&self, side: Side, src: WireSource) -> u64 {
        match src {
            WireSource::Off => 0,
            WireSource::Incoming(from) => {
                let pos = side.feeders().position(|s| s == from).expect("no U-turns in the switch box");
                1 + pos as u64
            }
            WireSource::Local(k) => {
                debug_assert!(k < self.sources);
                4 + k as u64
            }
        }
    }

    pub fn decode_wire(&self, side: Side, value: u64) -> Result<WireSource, SelectError> {
        let options = Self::wire_options(self.sources);
        let v = value as usize;
        if v >= options {
            return Err(SelectError::OutOfRange { value, options });
        }
        Ok(match v {
            0 => WireSource::Off,
            1..=3 => WireSource::Incoming(side.feeders().nth(v - 1).unwrap()),
            v => WireSource::Local(v - 4),
        })
    }

    pub fn lut_tt(&self, bits: &ConfigBits, slot: usize) -> u16 {
        bits.field(self.lut_offset(slot), LUT_TT_BITS) as u16
    }

    pub fn set_lut_tt(&self, bits: &mut ConfigBits, slot: usize, tt: u16) {
        bits.set_field(self.lut_offset(slot), LUT_TT_BITS, tt as u64);
    }

    /// Whether slot `slot` drives its output from the flip-flop.
    pub fn ff_used(&self, bits: &ConfigBits, slot: usize) -> bool {
        bits.get(self.ff_offset(slot))
    }

    pub fn set_ff_used(&self, bits: &mut ConfigBits, slot: usize, used: bool) {
        bits.set(self.ff_offset(slot), used);
    }

    pub fn pin(&self, bits: &ConfigBits, sink: usize) -> Result<PinSource, SelectError> {
        self.decode_pin(bits.field(self.pin_offset(sink), self.pin_bits))
    }

    pub fn set_pin(&self, bits: &mut ConfigBits, sink: usize, src: PinSource) {
        bits.set_field(self.pin_offset(sink), self.pin_bits, self.encode_pin(src));
    }

    pub fn wire(&self, bits: &ConfigBits, side: Side, track: usize) -> Result<WireSource, SelectError> {
        self.decode_wire(side, bits.field(self.wire_offset(side, track), self.wire_bits))
    }

    pub fn set_wire(&self, bits: &mut ConfigBits, side: Side, track: usize, src: WireSource) {
        bits.set_field(self.wire_offset(side, track), self.wire_bits, self.encode_wire(side, src));
    }

    pub fn mode(&self, bits: &ConfigBits) -> u64 {
        bits.field(0, self.mode_bits)
    }

    pub fn set_mode(&self, bits: &mut ConfigBits, mode: u64) {
        bits.set_field(0, self.mode_bits, mode);
    }
}

/// Where a DspMac input pin lands: (row offset from DSP_top, sink index).
pub fn dsp_input_location(pin: usize) -> (usize, usize) {
    if pin < DSP_CLR_PIN {
        (0, pin)
    } else {
        (1, 0)
    }
}

/// Where a DspMac accumulator bit is sourced: (row offset from DSP_top, source index).
pub fn dsp_output_location(bit: usize) -> (usize, usize) {
    (bit / DSP_ACC_PER_HALF, bit % DSP_ACC_PER_HALF)
}

/// Identifier of the outgoing wire (tile, side, track).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wire {
    pub tile: TileCoord,
    pub side: Side,
    pub track: usize,
}

/// The physical wire set of a layout.
#[derive(Clone, Debug)]
pub struct RoutingGrid {
    rows: usize,
    cols: usize,
    routable: Vec<bool>,
}

impl RoutingGrid {
    pub fn new(layout: &FabricLayout) -> Self {
        RoutingGrid {
            rows: layout.rows(),
            cols: layout.cols(),
            routable: layout.tiles().map(|(_, k)| k.is_routable()).collect(),
        }
    }

    pub fn is_routable(&self, t: TileCoord) -> bool {
        self.routable[t.row * self.cols + t.col]
    }

    pub fn neighbor(&self, t: TileCoord, side: Side) -> Option<TileCoord> {
        let (dr, dc) = side.delta();
        let r = t.row as isize + dr;
        let c = t.col as isize + dc;
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            return None;
        }
        let n = TileCoord::new(r as usize, c as usize);
        self.is_routable(n).then_some(n)
    }

    pub fn wire_slots(&self) -> usize {
        self.rows * self.cols * 4 * CHANNEL_WIDTH
    }

    pub fn wire_id(&self, tile: TileCoord, side: Side, track: usize) -> WireId {
        WireId((((tile.row * self.cols + tile.col) * 4 + side.index()) * CHANNEL_WIDTH + track) as u32)
    }

    pub fn wire(&self, id: WireId) -> Wire {
        let i = id.0 as usize;
        let track = i % CHANNEL_WIDTH;
        let side = Side::ALL[(i / CHANNEL_WIDTH) % 4];
        let t = i / (4 * CHANNEL_WIDTH);
        Wire { tile: TileCoord::new(t / self.cols, t % self.cols), side, track }
    }

    /// A wire exists when both its source tile and destination tile are routable.
    pub fn exists(&self, id: WireId) -> bool {
        let w = self.wire(id);
        self.is_routable(w.tile) && self.neighbor(w.tile, w.side).is_some()
    }

    /// Tile the wire delivers into.
    pub fn dest(&self, id: WireId) -> TileCoord {
        let w = self.wire(id);
        self.neighbor(w.tile, w.side).expect("wire exists")
    }

    /// The wire arriving at `tile` from `side` on `track`, if there is one.
    pub fn incoming(&self, tile: TileCoord, side: Side, track: usize) -> Option<WireId> {
        let n = self.neighbor(tile, side)?;
        Some(self.wire_id(n, side.opposite(), track))
    }

    /// Outgoing wires of a tile that physically exist.
    pub fn outgoing(&self, tile: TileCoord) -> impl Iterator<Item = WireId> + '_ {
        Side::ALL
            .into_iter()
            .filter(move |&s| self.neighbor(tile, s).is_some())
            .flat_map(move |s| (0..CHANNEL_WIDTH).map(move |t| self.wire_id(tile, s, t)))
    }

    /// Wires a signal arriving on `id` may continue onto.
    pub fn successors(&self, id: WireId) -> impl Iterator<Item = WireId> + '_ {
        let w = self.wire(id);
        let at = self.dest(id);
        let came_from = w.side.opposite();
        Side::ALL
            .into_iter()
            .filter(move |&s| s != came_from && self.neighbor(at, s).is_some())
            .map(move |s| self.wire_id(at, s, w.track))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_widths() {
        let lut = TileArch::of(TileKind::Lut4ab).unwrap();
        assert_eq!(lut.pin_bits, 8);
        assert_eq!(lut.wire_bits, 4);
        let io = TileArch::of(TileKind::WestIo).unwrap();
        assert_eq!(io.wire_bits, 6);
        assert!(TileArch::of(TileKind::RegFile).is_none());
    }

    #[test]
    fn pin_encoding_round_trips() {
        for kind in [TileKind::Lut4ab, TileKind::EastIo, TileKind::DspTop, TileKind::DspBot] {
            let a = TileArch::of(kind).unwrap();
            let mut sources = vec![PinSource::Const(false), PinSource::Const(true)];
            sources.extend((0..a.sources).map(PinSource::Local));
            for side in Side::ALL {
                sources.push(PinSource::Incoming { side, track: CHANNEL_WIDTH - 1 });
            }
            for s in sources {
                assert_eq!(a.decode_pin(a.encode_pin(s)), Ok(s));
            }
            for side in Side::ALL {
                for from in side.feeders() {
                    let v = a.encode_wire(side, WireSource::Incoming(from));
                    assert_eq!(a.decode_wire(side, v), Ok(WireSource::Incoming(from)));
                }
            }
        }
    }

    #[test]
    fn fields_do_not_overlap() {
        let a = TileArch::of(TileKind::Lut4ab).unwrap();
        let mut used = vec![false; a.config_width()];
        let mut claim = |off: usize, len: usize| {
            for u in &mut used[off..off + len] {
                assert!(!*u);
                *u = true;
            }
        };
        for slot in 0..LUT_SLOTS {
            claim(a.lut_offset(slot), 16);
            claim(a.ff_offset(slot), 1);
        }
        for sink in 0..a.sinks {
            claim(a.pin_offset(sink), a.pin_bits);
        }
        for side in Side::ALL {
            for t in 0..CHANNEL_WIDTH {
                claim(a.wire_offset(side, t), a.wire_bits);
            }
        }
        assert!(used.iter().all(|&u| u));
    }

    #[test]
    fn edge_wires_do_not_exist() {
        let layout = FabricLayout::cmos28();
        let g = RoutingGrid::new(&layout);
        let west_io = TileCoord::new(1, 0);
        assert!(!g.exists(g.wire_id(west_io, Side::West, 0)));
        assert!(!g.exists(g.wire_id(west_io, Side::North, 0)));
        assert!(g.exists(g.wire_id(west_io, Side::East, 0)));
        assert!(g.exists(g.wire_id(west_io, Side::South, 0)));
        let id = g.wire_id(TileCoord::new(4, 4), Side::East, 7);
        assert_eq!(g.wire(id), Wire { tile: TileCoord::new(4, 4), side: Side::East, track: 7 });
        assert_eq!(g.dest(id), TileCoord::new(4, 5));
        assert_eq!(g.incoming(TileCoord::new(4, 5), Side::West, 7), Some(id));
        assert_eq!(g.successors(id).count(), 3);
    }
}

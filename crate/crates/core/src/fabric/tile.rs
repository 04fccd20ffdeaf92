// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use crate::arch;

/// Every tile type the layout parser understands.
///
/// Only `Lut4ab`, the DSP pair, and the two user IO columns are executable
/// by the simulator; the 130nm kinds are parsed and counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TileKind {
    Lut4ab,
    DspTop,
    DspBot,
    WestIo,
    EastIo,
    WIo,
    CpuIo,
    RegFile,
    Null,
    NTerm,
    STerm,
}

/// Per-tile resource contribution, summed by [`census`](crate::fabric::census).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub logic_cells: usize,
    pub flip_flops: usize,
    pub registers: usize,
    pub dsp_halves: usize,
    pub io_in: usize,
    pub io_out: usize,
}

impl TileKind {
    pub const ALL: [TileKind; 11] = [
        TileKind::Lut4ab,
        TileKind::DspTop,
        TileKind::DspBot,
        TileKind::WestIo,
        TileKind::EastIo,
        TileKind::WIo,
        TileKind::CpuIo,
        TileKind::RegFile,
        TileKind::Null,
        TileKind::NTerm,
        TileKind::STerm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TileKind::Lut4ab => "LUT4AB",
            TileKind::DspTop => "DSP_top",
            TileKind::DspBot => "DSP_bot",
            TileKind::WestIo => "WEST_IO",
            TileKind::EastIo => "EAST_IO",
            TileKind::WIo => "W_IO",
            TileKind::CpuIo => "CPU_IO",
            TileKind::RegFile => "RegFile",
            TileKind::Null => "NULL",
            TileKind::NTerm => "N_term",
            TileKind::STerm => "S_term",
        }
    }

    /// Stable one-octet code used in bitstream frame headers.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<TileKind> {
        TileKind::ALL.get(code as usize).copied()
    }

    pub fn cell_counts(self) -> CellCounts {
        let mut c = CellCounts::default();
        match self {
            TileKind::Lut4ab => {
                c.logic_cells = arch::LUT_SLOTS;
                c.flip_flops = arch::LUT_SLOTS;
            }
            TileKind::DspTop | TileKind::DspBot => c.dsp_halves = 1,
            TileKind::WestIo | TileKind::EastIo => {
                c.io_in = arch::IO_PINS;
                c.io_out = arch::IO_PINS;
            }
            // tri-mode GPIO: each bit can act as either direction
            TileKind::WIo => {
                c.io_in = 2;
                c.io_out = 2;
            }
            TileKind::CpuIo => {
                c.io_in = 8;
                c.io_out = 12;
            }
            TileKind::RegFile => c.registers = 32,
            TileKind::Null | TileKind::NTerm | TileKind::STerm => {}
        }
        c
    }

    /// True for tiles that own a switch matrix and take part in routing.
    pub fn is_routable(self) -> bool {
        matches!(
            self,
            TileKind::Lut4ab | TileKind::DspTop | TileKind::DspBot | TileKind::WestIo | TileKind::EastIo
        )
    }

    /// True for tiles that receive a frame in the bitstream.
    pub fn is_configurable(self) -> bool {
        !matches!(self, TileKind::Null | TileKind::NTerm | TileKind::STerm)
    }

    /// Configuration bits this tile consumes.
    pub fn config_width(self) -> usize {
        arch::TileArch::of(self).map_or(0, |a| a.config_width())
    }
}

impl fmt::Display for TileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TileKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s {
            "LUT4AB" => TileKind::Lut4ab,
            "DSP_top" => TileKind::DspTop,
            "DSP_bot" => TileKind::DspBot,
            "WEST_IO" => TileKind::WestIo,
            "EAST_IO" => TileKind::EastIo,
            "W_IO" => TileKind::WIo,
            "CPU_IO" => TileKind::CpuIo,
            "RegFile" => TileKind::RegFile,
            "NULL" => TileKind::Null,
            // FABulous reference fabrics spell the terminators with a wire-length suffix.
            "N_term" | "N_term_single2" | "N_term_single" => TileKind::NTerm,
            "S_term" | "S_term_single2" | "s_term_single2" | "S_term_single" => TileKind::STerm,
            _ => return Err(()),
        };
        Ok(kind)
    }
}

/// Aggregate fabric resources.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ResourceCensus {
    pub logic_cells: usize,
    /// One flip-flop per LUT4 logic cell.
    pub flip_flops: usize,
    /// Register-file storage entries (RegFile tiles).
    pub registers: usize,
    pub dsp_slices: usize,
    pub io_input_bits: usize,
    pub io_output_bits: usize,
}

impl Add for ResourceCensus {
    type Output = ResourceCensus;

    fn add(self, rhs: ResourceCensus) -> ResourceCensus {
        ResourceCensus {
            logic_cells: self.logic_cells + rhs.logic_cells,
            flip_flops: self.flip_flops + rhs.flip_flops,
            registers: self.registers + rhs.registers,
            dsp_slices: self.dsp_slices + rhs.dsp_slices,
            io_input_bits: self.io_input_bits + rhs.io_input_bits,
            io_output_bits: self.io_output_bits + rhs.io_output_bits,
        }
    }
}

impl AddAssign for ResourceCensus {
    fn add_assign(&mut self, rhs: ResourceCensus) {
        *self = *self + rhs;
    }
}

impl fmt::Display for ResourceCensus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>8}", "resource", "count")?;
        writeln!(f, "{:<16}{:>8}", "logic_cells", self.logic_cells)?;
        writeln!(f, "{:<16}{:>8}", "flip_flops", self.flip_flops)?;
        writeln!(f, "{:<16}{:>8}", "registers", self.registers)?;
        writeln!(f, "{:<16}{:>8}", "dsp_slices", self.dsp_slices)?;
        writeln!(f, "{:<16}{:>8}", "io_input_bits", self.io_input_bits)?;
        write!(f, "{:<16}{:>8}", "io_output_bits", self.io_output_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in TileKind::ALL {
            assert_eq!(kind.name().parse::<TileKind>(), Ok(kind));
            assert_eq!(TileKind::from_code(kind.code()), Some(kind));
        }
        assert!("LUT6".parse::<TileKind>().is_err());
    }

    #[test]
    fn lut_tile_has_one_ff_per_lut() {
        let c = TileKind::Lut4ab.cell_counts();
        assert_eq!(c.logic_cells, 8);
        assert_eq!(c.flip_flops, 8);
    }

    #[test]
    fn passive_tiles_contribute_nothing() {
        for kind in [TileKind::Null, TileKind::NTerm, TileKind::STerm] {
            assert_eq!(kind.cell_counts(), CellCounts::default());
            assert_eq!(kind.config_width(), 0);
        }
    }
}

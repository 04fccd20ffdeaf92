// SPDX-License-Identifier: Apache-2.0

use crate::arch::IO_PINS;
use crate::fabric::{FabricLayout, TileCoord, TileKind};

/// One of the two user IO columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bank {
    West,
    East,
}

impl Bank {
    pub fn tile_kind(self) -> TileKind {
        match self {
            Bank::West => TileKind::WestIo,
            Bank::East => TileKind::EastIo,
        }
    }

    pub fn of(kind: TileKind) -> Option<Bank> {
        match kind {
            TileKind::WestIo => Some(Bank::West),
            TileKind::EastIo => Some(Bank::East),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bank::West => "west",
            Bank::East => "east",
        }
    }
}

/// Maps IO bank bit indices to (tile, pin). Bit `k * 32 + p` is pin `p` of
/// the `k`-th tile of that bank in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoMap {
    west: Vec<TileCoord>,
    east: Vec<TileCoord>,
}

impl IoMap {
    pub fn new(layout: &FabricLayout) -> Self {
        IoMap {
            west: layout.tiles_of(TileKind::WestIo).collect(),
            east: layout.tiles_of(TileKind::EastIo).collect(),
        }
    }

    fn tiles(&self, bank: Bank) -> &[TileCoord] {
        match bank {
            Bank::West => &self.west,
            Bank::East => &self.east,
        }
    }

    pub fn width(&self, bank: Bank) -> usize {
        self.tiles(bank).len() * IO_PINS
    }

    pub fn location(&self, bank: Bank, index: usize) -> Option<(TileCoord, usize)> {
        self.tiles(bank).get(index / IO_PINS).map(|&t| (t, index % IO_PINS))
    }

    pub fn index_of(&self, tile: TileCoord, pin: usize) -> Option<(Bank, usize)> {
        for bank in [Bank::West, Bank::East] {
            if let Some(k) = self.tiles(bank).iter().position(|&t| t == tile) {
                return Some((bank, k * IO_PINS + pin));
            }
        }
        None
    }
}

/// Parallel bit vectors presented to / sampled from the IO columns in one cycle.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IoFrame {
    pub west_in: Vec<bool>,
    pub east_in: Vec<bool>,
    pub west_out: Vec<bool>,
    pub east_out: Vec<bool>,
}

impl IoFrame {
    pub fn new(layout: &FabricLayout) -> Self {
        let map = IoMap::new(layout);
        let w = map.width(Bank::West);
        let e = map.width(Bank::East);
        IoFrame { west_in: vec![false; w], east_in: vec![false; e], west_out: vec![false; w], east_out: vec![false; e] }
    }

    pub fn inputs(&self, bank: Bank) -> &[bool] {
        match bank {
            Bank::West => &self.west_in,
            Bank::East => &self.east_in,
        }
    }

    pub fn inputs_mut(&mut self, bank: Bank) -> &mut [bool] {
        match bank {
            Bank::West => &mut self.west_in,
            Bank::East => &mut self.east_in,
        }
    }

    pub fn outputs(&self, bank: Bank) -> &[bool] {
        match bank {
            Bank::West => &self.west_out,
            Bank::East => &self.east_out,
        }
    }

    pub fn outputs_mut(&mut self, bank: Bank) -> &mut [bool] {
        match bank {
            Bank::West => &mut self.west_out,
            Bank::East => &mut self.east_out,
        }
    }

    /// Drives `width` input bits starting at `offset` from `value`, LSB first.
    pub fn set_input_word(&mut self, bank: Bank, offset: usize, width: usize, value: u64) {
        let bits = self.inputs_mut(bank);
        for i in 0..width {
            bits[offset + i] = value >> i & 1 != 0;
        }
    }

    pub fn input_word(&self, bank: Bank, offset: usize, width: usize) -> u64 {
        pack(&self.inputs(bank)[offset..offset + width])
    }

    pub fn output_word(&self, bank: Bank, offset: usize, width: usize) -> u64 {
        pack(&self.outputs(bank)[offset..offset + width])
    }

    pub fn set_output_word(&mut self, bank: Bank, offset: usize, width: usize, value: u64) {
        let bits = self.outputs_mut(bank);
        for i in 0..width {
            bits[offset + i] = value >> i & 1 != 0;
        }
    }
}

fn pack(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u64) << i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cmos28_banks() {
        let layout = FabricLayout::cmos28();
        let map = IoMap::new(&layout);
        assert_eq!(map.width(Bank::West), 256);
        assert_eq!(map.width(Bank::East), 256);
        assert_eq!(map.location(Bank::East, 33), Some((TileCoord::new(2, 9), 1)));
        assert_eq!(map.index_of(TileCoord::new(2, 9), 1), Some((Bank::East, 33)));
        assert_eq!(map.location(Bank::West, 256), None);
    }

    #[test]
    fn words() {
        let mut io = IoFrame::new(&FabricLayout::cmos28());
        io.set_input_word(Bank::West, 30, 20, 0xABCDE);
        assert_eq!(io.input_word(Bank::West, 30, 20), 0xABCDE);
        assert_eq!(io.input_word(Bank::West, 0, 30), 0);
    }
}

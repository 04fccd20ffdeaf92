// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// Fixed-width bit vector holding one tile's configuration.
///
/// Bit `i` lives in octet `i / 8` at position `i % 8` (LSB-first), which is
/// also the on-disk payload order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ConfigBits {
    width: usize,
    bytes: Vec<u8>,
}

impl ConfigBits {
    pub fn zeros(width: usize) -> Self {
        ConfigBits { width, bytes: vec![0; width.div_ceil(8)] }
    }

    /// Wraps packed octets; bits past `width` in the last octet must be zero.
    pub fn from_bytes(width: usize, bytes: Vec<u8>) -> Option<Self> {
        if bytes.len() != width.div_ceil(8) {
            return None;
        }
        if width % 8 != 0 {
            let last = *bytes.last()?;
            if last >> (width % 8) != 0 {
                return None;
            }
        }
        Some(ConfigBits { width, bytes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, bit: usize) -> bool {
        assert!(bit < self.width, "bit {bit} out of range {}", self.width);
        self.bytes[bit / 8] >> (bit % 8) & 1 != 0
    }

    pub fn set(&mut self, bit: usize, value: bool) {
        assert!(bit < self.width, "bit {bit} out of range {}", self.width);
        let mask = 1 << (bit % 8);
        if value {
            self.bytes[bit / 8] |= mask;
        } else {
            self.bytes[bit / 8] &= !mask;
        }
    }

    /// Reads `len <= 64` bits starting at `offset`, LSB first.
    pub fn field(&self, offset: usize, len: usize) -> u64 {
        debug_assert!(len <= 64);
        (0..len).fold(0u64, |acc, i| acc | (self.get(offset + i) as u64) << i)
    }

    pub fn set_field(&mut self, offset: usize, len: usize, value: u64) {
        debug_assert!(len == 64 || value >> len == 0, "value {value:#x} wider than {len} bits");
        for i in 0..len {
            self.set(offset + i, value >> i & 1 != 0);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }
}

impl fmt::Debug for ConfigBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConfigBits({} bits, {} set)", self.width, self.count_ones())
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Fibonacci LFSR pseudo-random bit sequences and a self-synchronizing checker.

use crate::LinkError;

/// Polynomial `x^order + x^tap + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrbsPoly {
    pub order: u32,
    pub tap: u32,
}

impl PrbsPoly {
    pub const PRBS7: PrbsPoly = PrbsPoly { order: 7, tap: 6 };
    pub const PRBS31: PrbsPoly = PrbsPoly { order: 31, tap: 28 };

    fn mask(self) -> u32 {
        ((1u64 << self.order) - 1) as u32
    }

    /// Feedback bit for a register holding the last `order` bits, newest in bit 0.
    fn feedback(self, s: u32) -> u32 {
        ((s >> (self.order - 1)) ^ (s >> (self.tap - 1))) & 1
    }

    pub fn period(self) -> u64 {
        (1u64 << self.order) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrbsState {
    pub lfsr: u32,
}

/// Generator. Each output bit is also shifted into the register.
#[derive(Clone, Debug)]
pub struct Prbs {
    poly: PrbsPoly,
    state: u32,
}

impl Prbs {
    pub fn new(poly: PrbsPoly, seed: u32) -> Result<Self, LinkError> {
        let state = seed & poly.mask();
        if state == 0 {
            return Err(LinkError::ZeroState);
        }
        Ok(Prbs { poly, state })
    }

    pub fn prbs31(seed: u32) -> Result<Self, LinkError> {
        Prbs::new(PrbsPoly::PRBS31, seed)
    }

    pub fn state(&self) -> PrbsState {
        PrbsState { lfsr: self.state }
    }

    pub fn next_bit(&mut self) -> bool {
        let b = self.poly.feedback(self.state);
        self.state = (self.state << 1 | b) & self.poly.mask();
        b == 1
    }

    /// Next octet, first bit in the MSB.
    pub fn next_byte(&mut self) -> u8 {
        (0..8).fold(0u8, |a, _| a << 1 | self.next_bit() as u8)
    }

    pub fn fill(&mut self, buf: &mut [u8]) {
        buf.iter_mut().for_each(|b| *b = self.next_byte());
    }
}

/// PRBS31 bits from `state`.
pub fn prbs_next(state: PrbsState, nbits: usize) -> Result<(Vec<bool>, PrbsState), LinkError> {
    let mut g = Prbs::prbs31(state.lfsr)?;
    let bits = (0..nbits).map(|_| g.next_bit()).collect();
    Ok((bits, g.state()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PrbsCheck {
    pub locked: bool,
    /// Mismatches counted after lock.
    pub errors: u64,
    /// Bits compared after lock.
    pub checked: u64,
}

/// Loads its register from the incoming stream, declares lock after
/// `order` consecutive correct predictions, then free-runs so that a single
/// flipped bit counts as exactly one error.
#[derive(Clone, Debug)]
pub struct PrbsChecker {
    poly: PrbsPoly,
    history: u32,
    seen: u32,
    run: u32,
    locked: bool,
    errors: u64,
    checked: u64,
}

impl PrbsChecker {
    pub fn new(poly: PrbsPoly) -> Self {
        PrbsChecker { poly, history: 0, seen: 0, run: 0, locked: false, errors: 0, checked: 0 }
    }

    pub fn push(&mut self, bit: bool) {
        let predicted = self.poly.feedback(self.history) == 1;
        if self.locked {
            self.checked += 1;
            if predicted != bit {
                self.errors += 1;
            }
            self.history = (self.history << 1 | predicted as u32) & self.poly.mask();
            return;
        }
        if self.seen >= self.poly.order {
            self.run = if predicted == bit && self.history != 0 { self.run + 1 } else { 0 };
        } else {
            self.seen += 1;
        }
        self.history = (self.history << 1 | bit as u32) & self.poly.mask();
        if self.run >= self.poly.order {
            self.locked = true;
        }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            for i in (0..8).rev() {
                self.push(b >> i & 1 == 1);
            }
        }
    }

    pub fn report(&self) -> PrbsCheck {
        PrbsCheck { locked: self.locked, errors: self.errors, checked: self.checked }
    }
}

/// Runs a fresh PRBS31 checker over `bits`.
pub fn prbs_check(bits: &[bool]) -> PrbsCheck {
    let mut c = PrbsChecker::new(PrbsPoly::PRBS31);
    bits.iter().for_each(|&b| c.push(b));
    c.report()
}

// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::MlError;

/// `ap_fixed<28,19>`: 28-bit two's complement, 9 fraction bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(i32);

impl Fixed {
    pub const BITS: u32 = 28;
    pub const FRAC_BITS: u32 = 9;
    pub const MAX_RAW: i32 = (1 << (Self::BITS - 1)) - 1;
    pub const MIN_RAW: i32 = -(1 << (Self::BITS - 1));
    pub const SCALE: f64 = (1 << Self::FRAC_BITS) as f64;
    pub const ZERO: Fixed = Fixed(0);
    pub const MAX: Fixed = Fixed(Self::MAX_RAW);
    pub const MIN: Fixed = Fixed(Self::MIN_RAW);

    pub fn from_raw(raw: i32) -> Option<Fixed> {
        (Self::MIN_RAW..=Self::MAX_RAW).contains(&raw).then_some(Fixed(raw))
    }

    fn checked(v: f64, raw: f64) -> Result<Fixed, MlError> {
        if raw.is_nan() || raw < Self::MIN_RAW as f64 || raw > Self::MAX_RAW as f64 {
            return Err(MlError::Overflow(v));
        }
        Ok(Fixed(raw as i32))
    }

    /// Round to nearest, ties to even.
    pub fn from_f64(v: f64) -> Result<Fixed, MlError> {
        Self::checked(v, (v * Self::SCALE).round_ties_even())
    }

    /// Largest representable value not above `v`.
    pub fn floor_f64(v: f64) -> Result<Fixed, MlError> {
        Self::checked(v, (v * Self::SCALE).floor())
    }

    /// Rounds to nearest and clamps to the representable range.
    pub fn saturating_from_f64(v: f64) -> Fixed {
        if v.is_nan() {
            return Fixed::ZERO;
        }
        let raw = (v * Self::SCALE).round_ties_even().clamp(Self::MIN_RAW as f64, Self::MAX_RAW as f64);
        Fixed(raw as i32)
    }

    pub fn raw(self) -> i32 {
        self.0
    }

    /// Low 28 bits of the two's-complement encoding.
    pub fn bits(self) -> u32 {
        self.0 as u32 & ((1 << Self::BITS) - 1)
    }

    pub fn from_bits(bits: u32) -> Fixed {
        Fixed(((bits << (32 - Self::BITS)) as i32) >> (32 - Self::BITS))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    pub fn checked_add(self, rhs: Fixed) -> Option<Fixed> {
        Fixed::from_raw(self.0.checked_add(rhs.0)?)
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let t = Fixed::from_f64(0.4922).unwrap();
        assert_eq!(t.raw(), 252);
        assert_eq!(t.to_f64(), 0.4921875);
        assert_eq!(Fixed::from_f64(0.0).unwrap().raw(), 0);
        // ties go to even
        assert_eq!(Fixed::from_f64(0.5 / 512.0).unwrap().raw(), 0);
        assert_eq!(Fixed::from_f64(1.5 / 512.0).unwrap().raw(), 2);
        assert_eq!(Fixed::from_f64(-0.5 / 512.0).unwrap().raw(), 0);
        assert_eq!(Fixed::floor_f64(-0.001).unwrap().raw(), -1);
    }

    #[test]
    fn range_limits() {
        assert!(Fixed::from_f64(262_143.998).is_ok());
        assert!(matches!(Fixed::from_f64(262_144.0), Err(MlError::Overflow(_))));
        assert_eq!(Fixed::from_f64(-262_144.0).unwrap(), Fixed::MIN);
        assert_eq!(Fixed::saturating_from_f64(1e9), Fixed::MAX);
    }

    #[test]
    fn bit_encoding_round_trips() {
        for raw in [0, 1, -1, Fixed::MAX_RAW, Fixed::MIN_RAW, 12345, -9876] {
            let f = Fixed::from_raw(raw).unwrap();
            assert_eq!(Fixed::from_bits(f.bits()), f);
            assert!(f.bits() < 1 << 28);
        }
    }
}

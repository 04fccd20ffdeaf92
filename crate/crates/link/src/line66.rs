// SPDX-License-Identifier: Apache-2.0

//! 64B66B line code without the scrambler. A word is held in the low 66
//! bits of a `u128`: sync header in bits 1..0, octet `i` in bits
//! `2 + 8i .. 10 + 8i`.

use crate::LinkError;

pub const SYNC_DATA: u8 = 0b01;
pub const SYNC_CONTROL: u8 = 0b10;
pub const WORD_MASK: u128 = (1 << 66) - 1;

pub fn encode_64b66b(block: [u8; 8], is_control: bool) -> u128 {
    let header = if is_control { SYNC_CONTROL } else { SYNC_DATA };
    (u64::from_le_bytes(block) as u128) << 2 | header as u128
}

pub fn decode_64b66b(word: u128) -> Result<([u8; 8], bool), LinkError> {
    let control = match (word & 0b11) as u8 {
        SYNC_DATA => false,
        SYNC_CONTROL => true,
        h => return Err(LinkError::InvalidSyncHeader(h)),
    };
    Ok((((word >> 2) as u64).to_le_bytes(), control))
}

/// Sync header bits of a word.
pub fn header(word: u128) -> u8 {
    (word & 0b11) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers() {
        assert_eq!(header(encode_64b66b([0; 8], true)), 0b10);
        assert_eq!(header(encode_64b66b([0xFF; 8], false)), 0b01);
        assert_eq!(decode_64b66b(0b11), Err(LinkError::InvalidSyncHeader(0b11)));
        assert_eq!(decode_64b66b(0b00), Err(LinkError::InvalidSyncHeader(0b00)));
    }

    #[test]
    fn octet_positions() {
        let w = encode_64b66b([1, 0, 0, 0, 0, 0, 0, 0x80], false);
        assert_eq!(w, 1 << 2 | 1 << 65 | 0b01);
        assert_eq!(w & !WORD_MASK, 0);
    }
}

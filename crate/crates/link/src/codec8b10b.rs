// SPDX-License-Identifier: Apache-2.0

//! 8B10B line code. Symbols are 10-bit integers with bit `a` as the MSB,
//! so `abcdei fghj` reads left to right.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::LinkError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Disparity {
    #[default]
    Negative,
    Positive,
}

impl Disparity {
    fn flip(self) -> Self {
        match self {
            Disparity::Negative => Disparity::Positive,
            Disparity::Positive => Disparity::Negative,
        }
    }

    /// +1 or -1.
    pub fn sign(self) -> i32 {
        match self {
            Disparity::Negative => -1,
            Disparity::Positive => 1,
        }
    }
}

/// 5b/6b codes as (RD-, RD+). Balanced codes repeat the same value.
const SIX: [(u8, u8); 32] = [
    (0b100111, 0b011000),
    (0b011101, 0b100010),
    (0b101101, 0b010010),
    (0b110001, 0b110001),
    (0b110101, 0b001010),
    (0b101001, 0b101001),
    (0b011001, 0b011001),
    (0b111000, 0b000111),
    (0b111001, 0b000110),
    (0b100101, 0b100101),
    (0b010101, 0b010101),
    (0b110100, 0b110100),
    (0b001101, 0b001101),
    (0b101100, 0b101100),
    (0b011100, 0b011100),
    (0b010111, 0b101000),
    (0b011011, 0b100100),
    (0b100011, 0b100011),
    (0b010011, 0b010011),
    (0b110010, 0b110010),
    (0b001011, 0b001011),
    (0b101010, 0b101010),
    (0b011010, 0b011010),
    (0b111010, 0b000101),
    (0b110011, 0b001100),
    (0b100110, 0b100110),
    (0b010110, 0b010110),
    (0b110110, 0b001001),
    (0b001110, 0b001110),
    (0b101110, 0b010001),
    (0b011110, 0b100001),
    (0b101011, 0b010100),
];

const K28_SIX: (u8, u8) = (0b001111, 0b110000);

/// 3b/4b data codes; index 7 is the primary D.x.P7.
const FOUR: [(u8, u8); 8] = [
    (0b1011, 0b0100),
    (0b1001, 0b1001),
    (0b0101, 0b0101),
    (0b1100, 0b0011),
    (0b1101, 0b0010),
    (0b1010, 0b1010),
    (0b0110, 0b0110),
    (0b1110, 0b0001),
];

const A7: (u8, u8) = (0b0111, 0b1000);

const K_FOUR: [(u8, u8); 8] = [
    (0b1011, 0b0100),
    (0b0110, 0b1001),
    (0b1010, 0b0101),
    (0b1100, 0b0011),
    (0b1101, 0b0010),
    (0b0101, 0b1010),
    (0b1001, 0b0110),
    (0b0111, 0b1000),
];

/// Control codes the encoder accepts: K28.0..7 and K23/27/29/30.7.
pub const CONTROL_CODES: [u8; 12] = [0x1C, 0x3C, 0x5C, 0x7C, 0x9C, 0xBC, 0xDC, 0xFC, 0xF7, 0xFB, 0xFD, 0xFE];

pub const K28_5: u8 = 0xBC;
pub const K29_7: u8 = 0xFD;

fn pick(pair: (u8, u8), rd: Disparity) -> u8 {
    match rd {
        Disparity::Negative => pair.0,
        Disparity::Positive => pair.1,
    }
}

/// Disparity after a sub-block: unbalanced blocks flip it.
fn after(block: u8, width: u32, rd: Disparity) -> Disparity {
    if block.count_ones() * 2 == width {
        rd
    } else {
        rd.flip()
    }
}

fn encode_raw(byte: u8, control: bool, rd: Disparity) -> Result<(u16, Disparity), LinkError> {
    let x = (byte & 0x1F) as usize;
    let y = (byte >> 5) as usize;
    if control && !CONTROL_CODES.contains(&byte) {
        return Err(LinkError::InvalidControlCode(byte));
    }
    let six = if control && x == 28 { pick(K28_SIX, rd) } else { pick(SIX[x], rd) };
    let rd6 = after(six, 6, rd);
    let four = if control {
        pick(K_FOUR[y], rd6)
    } else if y == 7 {
        let alt = match rd6 {
            Disparity::Negative => matches!(x, 17 | 18 | 20),
            Disparity::Positive => matches!(x, 11 | 13 | 14),
        };
        pick(if alt { A7 } else { FOUR[7] }, rd6)
    } else {
        pick(FOUR[y], rd6)
    };
    Ok(((six as u16) << 4 | four as u16, after(four, 4, rd6)))
}

/// Encodes one octet. `is_control` selects the K-code table.
pub fn encode_8b10b(byte: u8, is_control: bool, rd: Disparity) -> Result<(u16, Disparity), LinkError> {
    encode_raw(byte, is_control, rd)
}

struct Tables {
    /// (symbol, rd) -> (byte, control, rd')
    decode: HashMap<(u16, Disparity), (u8, bool, Disparity)>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut decode = HashMap::new();
        for rd in [Disparity::Negative, Disparity::Positive] {
            let data = (0..=255u8).map(|b| (b, false));
            let control = CONTROL_CODES.iter().map(|&b| (b, true));
            for (byte, k) in data.chain(control) {
                let (sym, next) = encode_raw(byte, k, rd).expect("table entries encode");
                let prev = decode.insert((sym, rd), (byte, k, next));
                assert!(prev.is_none(), "8B10B symbol 0b{sym:010b} assigned twice");
            }
        }
        Tables { decode }
    })
}

/// Decodes one symbol against the receiver's running disparity.
pub fn decode_8b10b(symbol: u16, rd: Disparity) -> Result<(u8, bool, Disparity), LinkError> {
    let t = tables();
    if let Some(&hit) = t.decode.get(&(symbol, rd)) {
        return Ok(hit);
    }
    if t.decode.contains_key(&(symbol, rd.flip())) {
        Err(LinkError::DisparityError(symbol))
    } else {
        Err(LinkError::InvalidSymbol(symbol))
    }
}

/// Stateful encoder that carries running disparity between symbols.
#[derive(Clone, Debug, Default)]
pub struct Encoder {
    pub rd: Disparity,
}

impl Encoder {
    pub fn encode(&mut self, byte: u8, is_control: bool) -> Result<u16, LinkError> {
        let (sym, rd) = encode_8b10b(byte, is_control, self.rd)?;
        self.rd = rd;
        Ok(sym)
    }
}

/// Stateful decoder. After an error the disparity is left unchanged.
#[derive(Clone, Debug, Default)]
pub struct Decoder {
    pub rd: Disparity,
}

impl Decoder {
    pub fn decode(&mut self, symbol: u16) -> Result<(u8, bool), LinkError> {
        let (byte, k, rd) = decode_8b10b(symbol, self.rd)?;
        self.rd = rd;
        Ok((byte, k))
    }
}

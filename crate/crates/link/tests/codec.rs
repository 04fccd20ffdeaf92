// SPDX-License-Identifier: Apache-2.0

use efab_link::codec8b10b::{Encoder, CONTROL_CODES};
use efab_link::{decode_8b10b, encode_8b10b, Disparity, LinkError};
use proptest::prelude::*;

const BOTH: [Disparity; 2] = [Disparity::Negative, Disparity::Positive];

fn bits(sym: u16) -> impl Iterator<Item = bool> {
    (0..10).rev().map(move |i| sym >> i & 1 == 1)
}

#[test]
fn standard_code_points() {
    use Disparity::*;
    let cases: &[(u8, bool, Disparity, u16)] = &[
        (0x00, false, Negative, 0b100111_0100),
        (0x03, false, Negative, 0b110001_1011),
        (0xB5, false, Negative, 0b101010_1010),
        (0x4A, false, Positive, 0b010101_0101),
        (0xFF, false, Negative, 0b101011_0001),
        (0xBC, true, Negative, 0b001111_1010),
        (0xBC, true, Positive, 0b110000_0101),
        (0xFC, true, Negative, 0b001111_1000),
        (0xF7, true, Negative, 0b111010_1000),
        (0x3C, true, Negative, 0b001111_1001),
    ];
    for &(byte, k, rd, sym) in cases {
        assert_eq!(encode_8b10b(byte, k, rd).unwrap().0, sym, "{byte:02X} k={k} {rd:?}");
    }
}

#[test]
fn every_symbol_obeys_the_sub_block_rules() {
    for rd in BOTH {
        let data = (0..=255u8).map(|b| (b, false));
        for (byte, k) in data.chain(CONTROL_CODES.iter().map(|&b| (b, true))) {
            let (sym, next) = encode_8b10b(byte, k, rd).unwrap();
            let ones = sym.count_ones();
            assert!((4..=6).contains(&ones), "{byte:02X} {k}");
            let six = (sym >> 4).count_ones() as i32 * 2 - 6;
            let four = (sym & 0xF).count_ones() as i32 * 2 - 4;
            assert!(six.abs() <= 2 && four.abs() <= 2);
            // running digital sum at the symbol boundary must be the new disparity
            assert_eq!(rd.sign() + six + four, next.sign(), "{byte:02X} k={k} from {rd:?}");
            // and never leaves +-3 inside the symbol
            let mut rds = rd.sign();
            for b in bits(sym) {
                rds += if b { 1 } else { -1 };
                assert!(rds.abs() <= 3);
            }
        }
    }
}

#[test]
fn round_trip_all_bytes_both_disparities() {
    for rd in BOTH {
        for b in 0..=255u8 {
            let (sym, next) = encode_8b10b(b, false, rd).unwrap();
            assert_eq!(decode_8b10b(sym, rd).unwrap(), (b, false, next));
        }
        for &k in &CONTROL_CODES {
            let (sym, next) = encode_8b10b(k, true, rd).unwrap();
            assert_eq!(decode_8b10b(sym, rd).unwrap(), (k, true, next));
        }
    }
}

#[test]
fn only_legal_symbols_decode() {
    let legal: usize = (0..1024u16)
        .map(|s| BOTH.iter().filter(|&&rd| decode_8b10b(s, rd).is_ok()).count())
        .sum();
    // 268 characters under each disparity
    assert_eq!(legal, 2 * (256 + CONTROL_CODES.len()));
    for s in 0..1024u16 {
        if !(4..=6).contains(&s.count_ones()) {
            assert_eq!(decode_8b10b(s, Disparity::Negative), Err(LinkError::InvalidSymbol(s)));
        }
    }
}

#[test]
fn disparity_asymmetric_code_is_caught() {
    // D7.0: 111000 at RD-, 000111 at RD+
    let (sym, _) = encode_8b10b(0x07, false, Disparity::Positive).unwrap();
    assert_eq!(decode_8b10b(sym, Disparity::Negative), Err(LinkError::DisparityError(sym)));
}

proptest! {
    #[test]
    fn data_streams_hold_disparity_run_length_and_comma_rules(data in proptest::collection::vec(any::<u8>(), 1..400)) {
        let mut enc = Encoder::default();
        let mut stream = Vec::new();
        let mut rds = -1i32;
        for &b in &data {
            let sym = enc.encode(b, false).unwrap();
            for bit in bits(sym) {
                rds += if bit { 1 } else { -1 };
                stream.push(bit);
            }
            prop_assert!(rds == -1 || rds == 1);
            prop_assert_eq!(rds, enc.rd.sign());
        }
        let mut run = 1;
        for w in stream.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            prop_assert!(run <= 5);
        }
        // the comma sequences never occur in data
        for w in stream.windows(7) {
            prop_assert!(w != [false, false, true, true, true, true, true]);
            prop_assert!(w != [true, true, false, false, false, false, false]);
        }
        let mut rd = Disparity::Negative;
        let mut enc = Encoder::default();
        for &b in &data {
            let sym = enc.encode(b, false).unwrap();
            let (back, k, next) = decode_8b10b(sym, rd).unwrap();
            prop_assert_eq!((back, k), (b, false));
            rd = next;
        }
    }
}

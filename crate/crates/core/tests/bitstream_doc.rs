// SPDX-License-Identifier: Apache-2.0

//! The per-kind payload table in docs/bitstream.md must match the code.

use efab_core::arch::{TileArch, CHANNEL_WIDTH};
use efab_core::TileKind;

const DOC: &str = include_str!("../../../docs/bitstream.md");

#[test]
fn payload_table_matches_arch() {
    let mut rows = 0;
    for line in DOC.lines() {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        let Some(kind) = TileKind::ALL.into_iter().find(|k| cells.first() == Some(&k.name())) else {
            continue;
        };
        if cells.len() != 8 {
            continue;
        }
        let nums: Vec<usize> = cells[1..].iter().map(|c| c.parse().unwrap()).collect();
        let arch = TileArch::of(kind).unwrap();
        assert_eq!(nums[0], kind.code() as usize, "{kind} code");
        assert_eq!(nums[1], arch.sources, "{kind} sources");
        assert_eq!(nums[2], arch.sinks, "{kind} sinks");
        assert_eq!(nums[3], arch.mode_bits, "{kind} mode bits");
        assert_eq!(nums[4], arch.pin_bits, "{kind} pin bits");
        assert_eq!(nums[5], arch.wire_bits, "{kind} wire bits");
        assert_eq!(nums[6], kind.config_width(), "{kind} width");
        // width recomputed from the documented field sizes
        let per_pin = if kind == TileKind::Lut4ab { 16 + 1 + 4 * nums[4] } else { nums[4] };
        let pins = if kind == TileKind::Lut4ab { 8 * per_pin } else { nums[3] + nums[2] * per_pin };
        assert_eq!(pins + 4 * CHANNEL_WIDTH * nums[5], nums[6], "{kind} documented fields");
        rows += 1;
    }
    assert_eq!(rows, 5);
    let configurable = TileKind::ALL.into_iter().filter(|k| TileArch::of(*k).is_some()).count();
    assert_eq!(configurable, rows);
}

#[test]
fn documented_offsets() {
    let lut = TileArch::of(TileKind::Lut4ab).unwrap();
    assert_eq!(lut.lut_offset(1), 49);
    assert_eq!(lut.pin_offset(0), 17);
    assert!(DOC.contains("start at bit\n392") || DOC.contains("start at bit 392"));
    let io = TileArch::of(TileKind::WestIo).unwrap();
    assert_eq!(io.wire_offset(efab_core::arch::Side::North, 0), 256);
    assert!(DOC.contains("selects start at bit 256"));
}

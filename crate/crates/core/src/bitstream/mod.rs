// SPDX-License-Identifier: Apache-2.0

//! Configuration image format.
//!
//! ```text
//! magic "eFAB" | layout digest u32 | frame count u32 | frames... | crc32 u32
//! frame: row u16 | col u16 | kind u8 | 0u8 | width u32 | payload ceil(width/8) octets
//! ```
//!
//! All words little-endian. Frames are in row-major order, one per
//! configurable tile. The trailer is CRC-32 over every preceding octet.
//! See `docs/bitstream.md` for the per-kind payload layout.

mod bits;

use std::collections::BTreeMap;

use thiserror::Error;

pub use bits::ConfigBits;

use crate::crc::crc32;
use crate::fabric::{FabricLayout, TileCoord, TileKind};

pub const MAGIC: [u8; 4] = *b"eFAB";
const HEADER_LEN: usize = 12;
const FRAME_HEADER_LEN: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitstreamError {
    #[error("tile ({row},{col}) expects {expected} config bits, got {found}")]
    WidthMismatch { row: usize, col: usize, expected: usize, found: usize },
    #[error("no configuration for tile ({row},{col})")]
    MissingTileConfig { row: usize, col: usize },
    #[error("configuration given for non-configurable tile ({row},{col})")]
    UnexpectedTile { row: usize, col: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("bitstream targets layout {found:#010x}, this layout is {expected:#010x}")]
    DigestMismatch { expected: u32, found: u32 },
    #[error("crc mismatch: trailer {found:#010x}, computed {expected:#010x}")]
    CrcMismatch { expected: u32, found: u32 },
    #[error("bitstream truncated")]
    TruncatedStream,
    #[error("{0} unexpected octets after the last frame")]
    TrailingBytes(usize),
    #[error("frame {index} does not match the layout's tile order")]
    FrameMismatch { index: usize },
}

/// Per-tile configuration payloads of one fabric.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FabricConfig {
    tiles: BTreeMap<TileCoord, ConfigBits>,
}

impl FabricConfig {
    pub fn new() -> Self {
        FabricConfig::default()
    }

    /// All-zero payloads for every configurable tile of `layout`.
    pub fn zeroed(layout: &FabricLayout) -> Self {
        let tiles = layout
            .tiles()
            .filter(|(_, k)| k.is_configurable())
            .map(|(c, k)| (c, ConfigBits::zeros(k.config_width())))
            .collect();
        FabricConfig { tiles }
    }

    pub fn insert(&mut self, tile: TileCoord, bits: ConfigBits) -> Option<ConfigBits> {
        self.tiles.insert(tile, bits)
    }

    pub fn get(&self, tile: TileCoord) -> Option<&ConfigBits> {
        self.tiles.get(&tile)
    }

    pub fn get_mut(&mut self, tile: TileCoord) -> Option<&mut ConfigBits> {
        self.tiles.get_mut(&tile)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TileCoord, &ConfigBits)> {
        self.tiles.iter().map(|(&c, b)| (c, b))
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

pub fn encode_bitstream(layout: &FabricLayout, config: &FabricConfig) -> Result<Vec<u8>, BitstreamError> {
    for (c, _) in config.iter() {
        if c.row >= layout.rows() || c.col >= layout.cols() || !layout.tile(c).is_configurable() {
            return Err(BitstreamError::UnexpectedTile { row: c.row, col: c.col });
        }
    }
    let frames: Vec<(TileCoord, TileKind)> = layout.tiles().filter(|(_, k)| k.is_configurable()).collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&layout.digest().to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for (c, kind) in frames {
        let bits = config.get(c).ok_or(BitstreamError::MissingTileConfig { row: c.row, col: c.col })?;
        let expected = kind.config_width();
        if bits.width() != expected {
            return Err(BitstreamError::WidthMismatch { row: c.row, col: c.col, expected, found: bits.width() });
        }
        out.extend_from_slice(&(c.row as u16).to_le_bytes());
        out.extend_from_slice(&(c.col as u16).to_le_bytes());
        out.push(kind.code());
        out.push(0);
        out.extend_from_slice(&(expected as u32).to_le_bytes());
        out.extend_from_slice(bits.as_bytes());
    }
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn u16_at(data: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([data[at], data[at + 1]])
}

fn u32_at(data: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(data[at..at + 4].try_into().unwrap())
}

struct RawFrame {
    row: usize,
    col: usize,
    kind: u8,
    reserved: u8,
    width: usize,
    payload: std::ops::Range<usize>,
}

pub fn decode_bitstream(data: &[u8], layout: &FabricLayout) -> Result<FabricConfig, BitstreamError> {
    if data.len() < MAGIC.len() {
        return Err(BitstreamError::TruncatedStream);
    }
    if data[..4] != MAGIC {
        return Err(BitstreamError::BadMagic);
    }
    if data.len() < HEADER_LEN + 4 {
        return Err(BitstreamError::TruncatedStream);
    }
    let body_end = data.len() - 4;
    let count = u32_at(data, 8) as usize;
    let mut frames = Vec::with_capacity(count.min(1 << 16));
    let mut at = HEADER_LEN;
    for _ in 0..count {
        if at + FRAME_HEADER_LEN > body_end {
            return Err(BitstreamError::TruncatedStream);
        }
        let width = u32_at(data, at + 6) as usize;
        let start = at + FRAME_HEADER_LEN;
        let end = start.checked_add(width.div_ceil(8)).ok_or(BitstreamError::TruncatedStream)?;
        if end > body_end {
            return Err(BitstreamError::TruncatedStream);
        }
        frames.push(RawFrame {
            row: u16_at(data, at) as usize,
            col: u16_at(data, at + 2) as usize,
            kind: data[at + 4],
            reserved: data[at + 5],
            width,
            payload: start..end,
        });
        at = end;
    }
    if at != body_end {
        return Err(BitstreamError::TrailingBytes(body_end - at));
    }
    let found = u32_at(data, body_end);
    let expected = crc32(&data[..body_end]);
    if found != expected {
        return Err(BitstreamError::CrcMismatch { expected, found });
    }
    let digest = u32_at(data, 4);
    if digest != layout.digest() {
        return Err(BitstreamError::DigestMismatch { expected: layout.digest(), found: digest });
    }

    let mut config = FabricConfig::new();
    let mut expected_tiles = layout.tiles().filter(|(_, k)| k.is_configurable());
    for (index, f) in frames.iter().enumerate() {
        let (c, kind) = expected_tiles.next().ok_or(BitstreamError::FrameMismatch { index })?;
        if (f.row, f.col) != (c.row, c.col) || f.kind != kind.code() || f.reserved != 0 {
            return Err(BitstreamError::FrameMismatch { index });
        }
        if f.width != kind.config_width() {
            return Err(BitstreamError::WidthMismatch {
                row: c.row,
                col: c.col,
                expected: kind.config_width(),
                found: f.width,
            });
        }
        let bits = ConfigBits::from_bytes(f.width, data[f.payload.clone()].to_vec())
            .ok_or(BitstreamError::FrameMismatch { index })?;
        config.insert(c, bits);
    }
    if expected_tiles.next().is_some() {
        return Err(BitstreamError::FrameMismatch { index: frames.len() });
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tiny_layout() -> FabricLayout {
        FabricLayout::parse(
            "# name=tiny\nNULL,N_term,N_term,NULL\nWEST_IO,LUT4AB,DSP_top,EAST_IO\nWEST_IO,LUT4AB,DSP_bot,EAST_IO\nNULL,S_term,S_term,NULL\n",
        )
        .unwrap()
    }

    fn random_config(layout: &FabricLayout, seed: u64) -> FabricConfig {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = FabricConfig::zeroed(layout);
        let coords: Vec<TileCoord> = cfg.iter().map(|(c, _)| c).collect();
        for c in coords {
            let bits = cfg.get_mut(c).unwrap();
            for i in 0..bits.width() {
                bits.set(i, rng.gen());
            }
        }
        cfg
    }

    #[test]
    fn zero_round_trip_on_cmos28() {
        let layout = FabricLayout::cmos28();
        let cfg = FabricConfig::zeroed(&layout);
        let image = encode_bitstream(&layout, &cfg).unwrap();
        assert_eq!(&image[..4], b"eFAB");
        assert_eq!(decode_bitstream(&image, &layout).unwrap(), cfg);
        assert_eq!(encode_bitstream(&layout, &cfg).unwrap(), image);
    }

    #[test]
    fn width_mismatch() {
        let layout = tiny_layout();
        let mut cfg = FabricConfig::zeroed(&layout);
        let c = TileCoord::new(1, 1);
        let w = TileKind::Lut4ab.config_width();
        cfg.insert(c, ConfigBits::zeros(w + 1));
        assert_eq!(
            encode_bitstream(&layout, &cfg),
            Err(BitstreamError::WidthMismatch { row: 1, col: 1, expected: w, found: w + 1 })
        );
    }

    #[test]
    fn missing_and_unexpected_tiles() {
        let layout = tiny_layout();
        let mut cfg = FabricConfig::zeroed(&layout);
        cfg.tiles.remove(&TileCoord::new(2, 3));
        assert_eq!(encode_bitstream(&layout, &cfg), Err(BitstreamError::MissingTileConfig { row: 2, col: 3 }));
        let mut cfg = FabricConfig::zeroed(&layout);
        cfg.insert(TileCoord::new(0, 1), ConfigBits::zeros(0));
        assert_eq!(encode_bitstream(&layout, &cfg), Err(BitstreamError::UnexpectedTile { row: 0, col: 1 }));
    }

    #[test]
    fn payload_flip_is_crc_mismatch() {
        let layout = tiny_layout();
        let mut image = encode_bitstream(&layout, &random_config(&layout, 3)).unwrap();
        image[HEADER_LEN + FRAME_HEADER_LEN + 5] ^= 0x10;
        assert!(matches!(decode_bitstream(&image, &layout), Err(BitstreamError::CrcMismatch { .. })));
    }

    #[test]
    fn wrong_layout_is_digest_mismatch() {
        let cmos28 = FabricLayout::cmos28();
        let image = encode_bitstream(&cmos28, &FabricConfig::zeroed(&cmos28)).unwrap();
        assert!(matches!(
            decode_bitstream(&image, &FabricLayout::cmos130()),
            Err(BitstreamError::DigestMismatch { .. })
        ));
    }

    #[test]
    fn truncation_and_magic() {
        let layout = tiny_layout();
        let image = encode_bitstream(&layout, &FabricConfig::zeroed(&layout)).unwrap();
        assert_eq!(decode_bitstream(&image[..40], &layout), Err(BitstreamError::TruncatedStream));
        assert_eq!(decode_bitstream(&image[..2], &layout), Err(BitstreamError::TruncatedStream));
        let mut bad = image.clone();
        bad[0] = b'E';
        assert_eq!(decode_bitstream(&bad, &layout), Err(BitstreamError::BadMagic));
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let layout = FabricLayout::parse("NULL,N_term,NULL\nNULL,DSP_top,NULL\nNULL,DSP_bot,NULL\nNULL,S_term,NULL\n").unwrap();
        let cfg = random_config(&layout, 11);
        let image = encode_bitstream(&layout, &cfg).unwrap();
        for bit in 0..image.len() * 8 {
            let mut bad = image.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert!(decode_bitstream(&bad, &layout).is_err(), "flip of bit {bit} went unnoticed");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_random_payloads(seed in any::<u64>()) {
            let layout = tiny_layout();
            let cfg = random_config(&layout, seed);
            let image = encode_bitstream(&layout, &cfg).unwrap();
            prop_assert_eq!(decode_bitstream(&image, &layout).unwrap(), cfg);
        }
    }
}

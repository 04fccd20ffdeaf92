// SPDX-License-Identifier: Apache-2.0

//! CRC-32 protected frames over 64B66B.
//!
//! A frame is one SOF control block, `ceil(len / 8)` data blocks (the last
//! zero padded) and one EOF control block. Control block layouts, octet 0
//! first:
//!
//! | block | octets |
//! |-------|--------|
//! | IDLE  | `1E 00 00 00 00 00 00 00` |
//! | SOF   | `78 00 00 00 00 00 00 00` |
//! | EOF   | `87 n c0 c1 c2 c3 00 00` with `n` the valid octets in the last data block (0 for an empty frame) and `c` the CRC-32 LE |
//!
//! IDLE blocks may appear anywhere and are skipped.

use efab_core::crc::crc32;

use crate::line66::{decode_64b66b, encode_64b66b};
use crate::LinkError;

pub const BLOCK_IDLE: u8 = 0x1E;
pub const BLOCK_SOF: u8 = 0x78;
pub const BLOCK_EOF: u8 = 0x87;
pub const DEFAULT_MAX_PAYLOAD: usize = 8192;

pub fn idle_word() -> u128 {
    encode_64b66b([BLOCK_IDLE, 0, 0, 0, 0, 0, 0, 0], true)
}

/// Number of 66-bit words `stream_frame` emits for `len` octets.
pub fn frame_words(len: usize) -> usize {
    2 + len.div_ceil(8)
}

pub fn stream_frame(payload: &[u8], max: usize) -> Result<Vec<u128>, LinkError> {
    if payload.len() > max {
        return Err(LinkError::Oversize { max });
    }
    let mut words = Vec::with_capacity(frame_words(payload.len()));
    words.push(encode_64b66b([BLOCK_SOF, 0, 0, 0, 0, 0, 0, 0], true));
    for chunk in payload.chunks(8) {
        let mut block = [0u8; 8];
        block[..chunk.len()].copy_from_slice(chunk);
        words.push(encode_64b66b(block, false));
    }
    let last = match payload.len() % 8 {
        0 if payload.is_empty() => 0,
        0 => 8,
        r => r,
    };
    let c = crc32(payload).to_le_bytes();
    words.push(encode_64b66b([BLOCK_EOF, last as u8, c[0], c[1], c[2], c[3], 0, 0], true));
    Ok(words)
}

/// Parses exactly one frame (surrounding IDLE blocks allowed).
pub fn stream_parse(words: &[u128], max: usize) -> Result<Vec<u8>, LinkError> {
    let mut d = Deframer::new(max);
    let mut out = None;
    for &w in words {
        match d.push(w)? {
            Some(p) if out.is_none() => out = Some(p),
            Some(_) => return Err(LinkError::Malformed("more than one frame".into())),
            None => {}
        }
    }
    if d.in_frame() {
        return Err(LinkError::MissingEof);
    }
    out.ok_or(LinkError::MissingSof)
}

/// Incremental frame parser, one word per call.
#[derive(Clone, Debug)]
pub struct Deframer {
    max: usize,
    buf: Option<Vec<u8>>,
    overflow: bool,
    rejected: Option<Vec<u8>>,
}

impl Deframer {
    pub fn new(max: usize) -> Self {
        Deframer { max, buf: None, overflow: false, rejected: None }
    }

    pub fn in_frame(&self) -> bool {
        self.buf.is_some()
    }

    /// Payload of the last frame that failed its CRC check.
    pub fn take_rejected(&mut self) -> Option<Vec<u8>> {
        self.rejected.take()
    }

    /// Returns a payload when `word` completes a valid frame. After an error
    /// the parser waits for the next SOF.
    pub fn push(&mut self, word: u128) -> Result<Option<Vec<u8>>, LinkError> {
        let (block, control) = decode_64b66b(word).inspect_err(|_| self.buf = None)?;
        if !control {
            let Some(buf) = self.buf.as_mut() else { return Err(LinkError::MissingSof) };
            if buf.len() + 8 > self.max.div_ceil(8) * 8 {
                self.overflow = true;
            } else {
                buf.extend_from_slice(&block);
            }
            return Ok(None);
        }
        match block[0] {
            BLOCK_IDLE => Ok(None),
            BLOCK_SOF => {
                let dropped = self.buf.replace(Vec::new());
                self.overflow = false;
                if block[1..].iter().any(|&b| b != 0) {
                    self.buf = None;
                    return Err(LinkError::Malformed("SOF block padding".into()));
                }
                match dropped {
                    Some(_) => Err(LinkError::MissingEof),
                    None => Ok(None),
                }
            }
            BLOCK_EOF => {
                let mut buf = self.buf.take().ok_or(LinkError::MissingSof)?;
                if std::mem::take(&mut self.overflow) {
                    return Err(LinkError::Oversize { max: self.max });
                }
                let last = block[1] as usize;
                let consistent = if buf.is_empty() { last == 0 } else { (1..=8).contains(&last) };
                if !consistent || block[6] != 0 || block[7] != 0 {
                    return Err(LinkError::Malformed(format!("EOF block {block:02X?}")));
                }
                let len = if buf.is_empty() { 0 } else { buf.len() - 8 + last };
                if buf[len..].iter().any(|&b| b != 0) {
                    return Err(LinkError::Malformed("data block padding".into()));
                }
                buf.truncate(len);
                if len > self.max {
                    return Err(LinkError::Oversize { max: self.max });
                }
                let expected = u32::from_le_bytes(block[2..6].try_into().unwrap());
                let actual = crc32(&buf);
                if expected != actual {
                    self.rejected = Some(buf);
                    return Err(LinkError::CrcMismatch { expected, actual });
                }
                Ok(Some(buf))
            }
            t => {
                self.buf = None;
                Err(LinkError::Malformed(format!("control block type 0x{t:02X}")))
            }
        }
    }
}

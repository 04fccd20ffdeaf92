// SPDX-License-Identifier: Apache-2.0

//! Memory-mapped control protocol over 8B10B.
//!
//! Request on the wire: `K28.5, op, addr[4] LE, (data[4] LE), crc8, K29.7`.
//! Reply: `K28.5, status, data[4] LE, crc8, K29.7`. The CRC covers every
//! octet between the start symbol and the CRC itself.

use std::collections::VecDeque;

use crate::codec8b10b::{Decoder, Encoder, K28_5, K29_7};
use crate::regmap::RegisterMap;
use crate::virtual_link::VirtualLink;
use crate::LinkError;

/// CRC-8, polynomial 0x07, init 0, no reflection.
pub fn crc8(data: &[u8]) -> u8 {
    data.iter().fold(0u8, |mut c, &b| {
        c ^= b;
        for _ in 0..8 {
            c = if c & 0x80 != 0 { c << 1 ^ 0x07 } else { c << 1 };
        }
        c
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Read = 0x01,
    Write = 0x02,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControlFrame {
    pub opcode: Opcode,
    pub address: u32,
    pub data: u32,
    pub crc8: u8,
}

impl ControlFrame {
    pub fn read(address: u32) -> Self {
        let mut f = ControlFrame { opcode: Opcode::Read, address, data: 0, crc8: 0 };
        f.crc8 = crc8(&f.body());
        f
    }

    pub fn write(address: u32, data: u32) -> Self {
        let mut f = ControlFrame { opcode: Opcode::Write, address, data, crc8: 0 };
        f.crc8 = crc8(&f.body());
        f
    }

    /// Octets covered by the CRC.
    pub fn body(&self) -> Vec<u8> {
        let mut v = vec![self.opcode as u8];
        v.extend_from_slice(&self.address.to_le_bytes());
        if self.opcode == Opcode::Write {
            v.extend_from_slice(&self.data.to_le_bytes());
        }
        v
    }

    pub fn crc_valid(&self) -> bool {
        crc8(&self.body()) == self.crc8
    }

    pub fn to_octets(&self) -> Vec<u8> {
        let mut v = self.body();
        v.push(self.crc8);
        v
    }

    pub fn from_octets(octets: &[u8]) -> Result<Self, LinkError> {
        let (opcode, len) = match octets.first() {
            Some(0x01) => (Opcode::Read, 6),
            Some(0x02) => (Opcode::Write, 10),
            Some(op) => return Err(LinkError::Malformed(format!("control opcode 0x{op:02X}"))),
            None => return Err(LinkError::Malformed("empty control frame".into())),
        };
        if octets.len() != len {
            return Err(LinkError::Malformed(format!("control frame of {} octets", octets.len())));
        }
        let word = |i: usize| u32::from_le_bytes(octets[i..i + 4].try_into().unwrap());
        Ok(ControlFrame {
            opcode,
            address: word(1),
            data: if opcode == Opcode::Write { word(5) } else { 0 },
            crc8: octets[len - 1],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ReplyStatus {
    Ok = 0,
    CrcError = 1,
    UnmappedAddress = 2,
    ConfigCommitFailed = 3,
    Malformed = 4,
}

impl ReplyStatus {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => ReplyStatus::Ok,
            1 => ReplyStatus::CrcError,
            2 => ReplyStatus::UnmappedAddress,
            3 => ReplyStatus::ConfigCommitFailed,
            4 => ReplyStatus::Malformed,
            _ => return None,
        })
    }

    fn of(err: &LinkError) -> Self {
        match err {
            LinkError::CrcError { .. } => ReplyStatus::CrcError,
            LinkError::UnmappedAddress(_) => ReplyStatus::UnmappedAddress,
            LinkError::ConfigCommitFailed(_) => ReplyStatus::ConfigCommitFailed,
            _ => ReplyStatus::Malformed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplyFrame {
    pub status: ReplyStatus,
    pub data: u32,
    pub crc8: u8,
}

impl ReplyFrame {
    pub fn new(status: ReplyStatus, data: u32) -> Self {
        let mut r = ReplyFrame { status, data, crc8: 0 };
        r.crc8 = crc8(&r.body());
        r
    }

    fn body(&self) -> [u8; 5] {
        let d = self.data.to_le_bytes();
        [self.status as u8, d[0], d[1], d[2], d[3]]
    }

    pub fn to_octets(&self) -> Vec<u8> {
        let mut v = self.body().to_vec();
        v.push(self.crc8);
        v
    }

    pub fn from_octets(octets: &[u8]) -> Result<Self, LinkError> {
        if octets.len() != 6 {
            return Err(LinkError::Malformed(format!("reply of {} octets", octets.len())));
        }
        let status = ReplyStatus::from_u8(octets[0])
            .ok_or_else(|| LinkError::Malformed(format!("reply status {}", octets[0])))?;
        let r = ReplyFrame { status, data: u32::from_le_bytes(octets[1..5].try_into().unwrap()), crc8: octets[5] };
        let expected = crc8(&r.body());
        if expected != r.crc8 {
            return Err(LinkError::CrcError { expected, actual: r.crc8 });
        }
        Ok(r)
    }
}

/// Applies one request to the register map.
pub fn control_transact(frame: &ControlFrame, regs: &mut RegisterMap) -> Result<ReplyFrame, LinkError> {
    let expected = crc8(&frame.body());
    if expected != frame.crc8 {
        return Err(LinkError::CrcError { expected, actual: frame.crc8 });
    }
    let data = match frame.opcode {
        Opcode::Read => regs.read(frame.address)?,
        Opcode::Write => {
            regs.write(frame.address, frame.data)?;
            0
        }
    };
    Ok(ReplyFrame::new(ReplyStatus::Ok, data))
}

/// Encodes `octets` between start and end control symbols.
pub fn frame_symbols(octets: &[u8], enc: &mut Encoder) -> Vec<u16> {
    let mut v = Vec::with_capacity(octets.len() + 2);
    v.push(enc.encode(K28_5, true).unwrap());
    v.extend(octets.iter().map(|&b| enc.encode(b, false).unwrap()));
    v.push(enc.encode(K29_7, true).unwrap());
    v
}

/// Collects the octets of one framed message from a symbol stream.
#[derive(Clone, Debug, Default)]
pub struct SymbolDeframer {
    pub decoder: Decoder,
    buf: Option<Vec<u8>>,
}

impl SymbolDeframer {
    pub fn push(&mut self, symbol: u16) -> Result<Option<Vec<u8>>, LinkError> {
        let (byte, k) = match self.decoder.decode(symbol) {
            Ok(v) => v,
            Err(e) => {
                self.buf = None;
                return Err(e);
            }
        };
        match (k, byte) {
            (true, K28_5) => {
                let dropped = self.buf.replace(Vec::new());
                if dropped.is_some() {
                    return Err(LinkError::MissingEof);
                }
            }
            (true, K29_7) => return self.buf.take().map(Some).ok_or(LinkError::MissingSof),
            (true, b) => return Err(LinkError::Malformed(format!("unexpected control code 0x{b:02X}"))),
            (false, b) => match self.buf.as_mut() {
                Some(buf) => buf.push(b),
                None => return Err(LinkError::MissingSof),
            },
        }
        Ok(None)
    }
}

/// Host and ASIC control endpoints joined by two [`VirtualLink`]s.
pub struct ControlLink {
    pub regs: RegisterMap,
    host_tx: Encoder,
    host_rx: SymbolDeframer,
    asic_tx: Encoder,
    asic_rx: SymbolDeframer,
    down: VirtualLink<u16>,
    up: VirtualLink<u16>,
    last_asic_error: Option<LinkError>,
    cycles: u64,
    /// Cycles allowed for one round trip before [`LinkError::Deadlock`].
    pub timeout: u64,
}

impl ControlLink {
    pub fn new(regs: RegisterMap, latency: usize) -> Self {
        ControlLink {
            regs,
            host_tx: Encoder::default(),
            host_rx: SymbolDeframer::default(),
            asic_tx: Encoder::default(),
            asic_rx: SymbolDeframer::default(),
            down: VirtualLink::new(latency),
            up: VirtualLink::new(latency),
            last_asic_error: None,
            cycles: 0,
            timeout: 1000 + 4 * latency as u64,
        }
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Sends one request and runs the link until the reply arrives.
    pub fn transact(&mut self, frame: &ControlFrame) -> Result<ReplyFrame, LinkError> {
        let mut tx: VecDeque<u16> = frame_symbols(&frame.to_octets(), &mut self.host_tx).into();
        let mut reply_tx: VecDeque<u16> = VecDeque::new();
        let start = self.cycles;
        loop {
            self.cycles += 1;
            if let Some(sym) = self.down.tick(tx.pop_front()) {
                match self.asic_rx.push(sym) {
                    Ok(Some(octets)) => {
                        let reply = ControlFrame::from_octets(&octets)
                            .and_then(|req| control_transact(&req, &mut self.regs))
                            .unwrap_or_else(|e| {
                                let r = ReplyFrame::new(ReplyStatus::of(&e), 0);
                                self.last_asic_error = Some(e);
                                r
                            });
                        reply_tx.extend(frame_symbols(&reply.to_octets(), &mut self.asic_tx));
                    }
                    Ok(None) => {}
                    Err(e) => {
                        // nothing to answer; the host times out
                        self.last_asic_error = Some(e);
                    }
                }
            }
            if let Some(sym) = self.up.tick(reply_tx.pop_front()) {
                if let Some(octets) = self.host_rx.push(sym)? {
                    return ReplyFrame::from_octets(&octets);
                }
            }
            let idle = self.cycles - start;
            if idle > self.timeout {
                return Err(LinkError::Deadlock { cycle: self.cycles, idle });
            }
        }
    }

    fn check(&mut self, reply: ReplyFrame) -> Result<u32, LinkError> {
        if reply.status == ReplyStatus::Ok {
            return Ok(reply.data);
        }
        Err(self.last_asic_error.take().unwrap_or(LinkError::Malformed(format!("reply status {:?}", reply.status))))
    }

    pub fn read(&mut self, address: u32) -> Result<u32, LinkError> {
        let reply = self.transact(&ControlFrame::read(address))?;
        self.check(reply)
    }

    pub fn write(&mut self, address: u32, data: u32) -> Result<(), LinkError> {
        let reply = self.transact(&ControlFrame::write(address, data))?;
        self.check(reply).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc8_check_value() {
        // CRC-8/SMBUS check value
        assert_eq!(crc8(b"123456789"), 0xF4);
        assert_eq!(crc8(&[]), 0);
    }

    #[test]
    fn frames_round_trip_through_octets() {
        for f in [ControlFrame::read(0x1_0020), ControlFrame::write(8, 0xDEAD_BEEF)] {
            assert_eq!(ControlFrame::from_octets(&f.to_octets()).unwrap(), f);
            assert!(f.crc_valid());
        }
        let r = ReplyFrame::new(ReplyStatus::UnmappedAddress, 7);
        assert_eq!(ReplyFrame::from_octets(&r.to_octets()).unwrap(), r);
    }

    #[test]
    fn symbol_deframer_needs_start() {
        let sym = Encoder::default().encode(1, false).unwrap();
        let mut d = SymbolDeframer::default();
        assert_eq!(d.push(sym), Err(LinkError::MissingSof));
    }
}

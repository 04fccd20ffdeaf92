// SPDX-License-Identifier: Apache-2.0

//! Digital periphery of the readout ASIC, simulated at the symbol level.
//!
//! The control path carries memory-mapped register transactions as
//! 8B10B symbols; the data path carries CRC-32 protected frames as
//! 64B66B words. Both run over lock-step [`VirtualLink`]s.

pub mod codec8b10b;
pub mod control;
pub mod line66;
pub mod loopback;
pub mod prbs;
pub mod regmap;
pub mod stream;
pub mod virtual_link;

use efab_core::sim::SimError;
use thiserror::Error;

pub use codec8b10b::{decode_8b10b, encode_8b10b, Disparity};
pub use control::{crc8, ControlFrame, ControlLink, Opcode, ReplyFrame, ReplyStatus};
pub use line66::{decode_64b66b, encode_64b66b};
pub use loopback::{run_loopback, BerReport, Dut, FaultSchedule, LoopbackConfig, NetlistDut, ReadyPattern};
pub use prbs::{prbs_check, prbs_next, Prbs, PrbsCheck, PrbsChecker, PrbsPoly, PrbsState};
pub use regmap::RegisterMap;
pub use stream::{stream_frame, stream_parse, Deframer, DEFAULT_MAX_PAYLOAD};
pub use virtual_link::VirtualLink;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("0x{0:02X} is not a defined control code")]
    InvalidControlCode(u8),
    #[error("symbol 0b{0:010b} is not in the 8B10B code space")]
    InvalidSymbol(u16),
    #[error("symbol 0b{0:010b} received with the wrong running disparity")]
    DisparityError(u16),
    #[error("control frame CRC mismatch: expected 0x{expected:02X}, got 0x{actual:02X}")]
    CrcError { expected: u8, actual: u8 },
    #[error("no register at address 0x{0:08X}")]
    UnmappedAddress(u32),
    #[error("configuration commit failed: {0}")]
    ConfigCommitFailed(SimError),
    #[error("invalid 64B66B sync header 0b{0:02b}")]
    InvalidSyncHeader(u8),
    #[error("stream frame CRC mismatch: expected 0x{expected:08X}, got 0x{actual:08X}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("data block outside a frame")]
    MissingSof,
    #[error("frame ended without an end-of-frame block")]
    MissingEof,
    #[error("frame payload exceeds {max} octets")]
    Oversize { max: usize },
    #[error("malformed {0}")]
    Malformed(String),
    #[error("PRBS state must be nonzero")]
    ZeroState,
    #[error("no progress for {idle} cycles (stopped at cycle {cycle})")]
    Deadlock { cycle: u64, idle: u64 },
}

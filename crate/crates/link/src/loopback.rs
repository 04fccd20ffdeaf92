// SPDX-License-Identifier: Apache-2.0

//! PRBS frame loopback through the fabric register stage.
//!
//! Host TX frames PRBS payloads onto the down link. The ASIC deframes them
//! into an RX FIFO that feeds the fabric's AXI-stream slave port four octets
//! per beat. Beats leaving the master port are reassembled on `tlast`,
//! framed again and sent up to the host, which checks CRC, payload and PRBS
//! continuity. The host only starts a frame when the RX FIFO has room for
//! all of its beats; freed FIFO slots travel back to the host as credits
//! with the same latency as the data links.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use efab_core::cad::designs::loopback_pins::*;
use efab_core::cad::{Netlist, NetlistSim, PortMap};
use efab_core::sim::{Bank, FabricState, IoFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prbs::{Prbs, PrbsChecker, PrbsPoly};
use crate::stream::{idle_word, stream_frame, Deframer};
use crate::virtual_link::VirtualLink;
use crate::LinkError;

/// Anything that can stand in for the fabric in the loopback: one call per clock.
pub trait Dut {
    fn io_frame(&self) -> IoFrame;
    fn step(&mut self, io: &IoFrame) -> IoFrame;
}

impl Dut for FabricState {
    fn io_frame(&self) -> IoFrame {
        FabricState::io_frame(self)
    }

    fn step(&mut self, io: &IoFrame) -> IoFrame {
        FabricState::step(self, io)
    }
}

/// Netlist-level reference model presented through the same IO banks.
pub struct NetlistDut<'a> {
    sim: NetlistSim<'a>,
    ports: PortMap,
    template: IoFrame,
}

impl<'a> NetlistDut<'a> {
    pub fn new(netlist: &'a Netlist, ports: PortMap, template: IoFrame) -> Result<Self, efab_core::cad::NetlistError> {
        Ok(NetlistDut { sim: NetlistSim::new(netlist)?, ports, template })
    }
}

impl Dut for NetlistDut<'_> {
    fn io_frame(&self) -> IoFrame {
        self.template.clone()
    }

    fn step(&mut self, io: &IoFrame) -> IoFrame {
        let ins: Vec<bool> = self.ports.inputs.iter().map(|&(_, bank, i)| io.inputs(bank)[i]).collect();
        let outs = self.sim.step(&ins);
        let mut frame = self.template.clone();
        for (&(_, bank, i), v) in self.ports.outputs.iter().zip(outs) {
            frame.outputs_mut(bank)[i] = v;
        }
        frame
    }
}

/// Downstream `m_tready` behaviour.
#[derive(Clone, Debug, PartialEq)]
pub enum ReadyPattern {
    Always,
    Never,
    /// Ready with the given probability each cycle.
    Random { probability: f64, seed: u64 },
    /// Not ready during each `(first cycle, length)` window; cycles count from 0.
    Stalls(Vec<(u64, u64)>),
}

enum ReadySource<'a> {
    Fixed(bool),
    Random(f64, ChaCha8Rng),
    Stalls(&'a [(u64, u64)]),
}

impl ReadySource<'_> {
    fn new(p: &ReadyPattern) -> ReadySource<'_> {
        match p {
            ReadyPattern::Always => ReadySource::Fixed(true),
            ReadyPattern::Never => ReadySource::Fixed(false),
            ReadyPattern::Random { probability, seed } => {
                ReadySource::Random(*probability, ChaCha8Rng::seed_from_u64(*seed))
            }
            ReadyPattern::Stalls(w) => ReadySource::Stalls(w),
        }
    }

    fn at(&mut self, cycle: u64) -> bool {
        match self {
            ReadySource::Fixed(v) => *v,
            ReadySource::Random(p, rng) => rng.gen_bool(*p),
            ReadySource::Stalls(w) => !w.iter().any(|&(s, n)| (s..s + n).contains(&cycle)),
        }
    }
}

/// Bit flips applied on the ASIC-to-host leg, keyed by frame index. Bit
/// offsets count from the MSB of payload octet 0, matching PRBS order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultSchedule {
    pub flips: BTreeMap<u64, Vec<u64>>,
}

impl FaultSchedule {
    pub fn new(pairs: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut s = FaultSchedule::default();
        for (frame, bit) in pairs {
            s.flips.entry(frame).or_default().push(bit);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.flips.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }
}

/// One `frame bit` pair per line; `#` starts a comment.
impl FromStr for FaultSchedule {
    type Err = LinkError;

    fn from_str(text: &str) -> Result<Self, LinkError> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<u64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| LinkError::Malformed(format!("fault file line {}: {e}", n + 1)))?;
            let [frame, bit] = nums[..] else {
                return Err(LinkError::Malformed(format!("fault file line {}: expected `frame bit`", n + 1)));
            };
            pairs.push((frame, bit));
        }
        Ok(FaultSchedule::new(pairs))
    }
}

#[derive(Clone, Debug)]
pub struct LoopbackConfig {
    pub n_frames: u64,
    pub frame_len: usize,
    pub prbs_seed: u32,
    pub ready: ReadyPattern,
    pub faults: FaultSchedule,
    /// Cycles per link direction.
    pub link_latency: usize,
    /// RX FIFO depth in frames.
    pub fifo_frames: usize,
    /// Cycles without any progress before giving up.
    pub stall_budget: u64,
    pub max_payload: usize,
}

impl Default for LoopbackConfig {
    fn default() -> Self {
        LoopbackConfig {
            n_frames: 1000,
            frame_len: 256,
            prbs_seed: 0x5EED_1234,
            ready: ReadyPattern::Always,
            faults: FaultSchedule::default(),
            link_latency: 8,
            fifo_frames: 2,
            stall_budget: 10_000,
            max_payload: crate::stream::DEFAULT_MAX_PAYLOAD,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BerReport {
    pub frames_sent: u64,
    pub frames_received: u64,
    pub frames_ok: u64,
    pub crc_errors: u64,
    /// Frames lost to framing errors other than CRC.
    pub framing_errors: u64,
    pub payload_mismatches: u64,
    pub bit_errors: u64,
    pub bits_compared: u64,
    pub prbs_errors: u64,
    pub cycles: u64,
}

impl BerReport {
    pub fn bit_error_rate(&self) -> f64 {
        if self.bits_compared == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }
}

impl fmt::Display for BerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 11] = [
            ("frames sent", self.frames_sent.to_string()),
            ("frames received", self.frames_received.to_string()),
            ("frames ok", self.frames_ok.to_string()),
            ("crc errors", self.crc_errors.to_string()),
            ("framing errors", self.framing_errors.to_string()),
            ("payload mismatches", self.payload_mismatches.to_string()),
            ("bit errors", self.bit_errors.to_string()),
            ("bits compared", self.bits_compared.to_string()),
            ("bit error rate", format!("{:.3e}", self.bit_error_rate())),
            ("prbs errors", self.prbs_errors.to_string()),
            ("cycles", self.cycles.to_string()),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<20} {v:>12}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Beat {
    data: u32,
    keep: u8,
    last: bool,
}

/// An empty payload still needs one beat to carry TLAST; it has no keep bits.
fn beats(payload: &[u8]) -> Vec<Beat> {
    if payload.is_empty() {
        return vec![Beat { data: 0, keep: 0, last: true }];
    }
    let n = payload.len().div_ceil(4);
    payload
        .chunks(4)
        .enumerate()
        .map(|(i, c)| {
            let mut d = [0u8; 4];
            d[..c.len()].copy_from_slice(c);
            Beat { data: u32::from_le_bytes(d), keep: (1u8 << c.len()) - 1, last: i + 1 == n }
        })
        .collect()
}

fn flip_payload_bit(words: &mut [u128], bit: u64) {
    let octet = (bit / 8) as usize;
    let word = 1 + octet / 8;
    let pos = 2 + (octet % 8) * 8 + (7 - (bit % 8) as usize);
    words[word] ^= 1u128 << pos;
}

fn validate(cfg: &LoopbackConfig) -> Result<(), LinkError> {
    if cfg.frame_len > cfg.max_payload {
        return Err(LinkError::Malformed(format!("frame length {} above {}", cfg.frame_len, cfg.max_payload)));
    }
    if cfg.fifo_frames == 0 {
        return Err(LinkError::Malformed("RX FIFO must hold at least one frame".into()));
    }
    for (&frame, bits) in &cfg.faults.flips {
        if frame >= cfg.n_frames {
            return Err(LinkError::Malformed(format!("fault in frame {frame} of {}", cfg.n_frames)));
        }
        if let Some(&b) = bits.iter().find(|&&b| b >= 8 * cfg.frame_len as u64) {
            return Err(LinkError::Malformed(format!("fault bit {b} beyond a {}-octet payload", cfg.frame_len)));
        }
    }
    Ok(())
}

pub fn run_loopback<D: Dut + ?Sized>(dut: &mut D, cfg: &LoopbackConfig) -> Result<BerReport, LinkError> {
    validate(cfg)?;
    let frame_beats = cfg.frame_len.div_ceil(4).max(1);
    let mut report = BerReport::default();
    let mut gen = Prbs::prbs31(cfg.prbs_seed)?;
    let mut ready = ReadySource::new(&cfg.ready);

    let mut down = VirtualLink::new(cfg.link_latency);
    let mut up = VirtualLink::new(cfg.link_latency);
    let mut credit_link = VirtualLink::new(cfg.link_latency);
    let mut credits = cfg.fifo_frames * frame_beats;

    let mut host_tx: VecDeque<u128> = VecDeque::new();
    let mut in_flight: VecDeque<Vec<u8>> = VecDeque::new();
    let mut host_rx = Deframer::new(cfg.max_payload);

    let mut asic_rx = Deframer::new(cfg.max_payload);
    let mut rx_fifo: VecDeque<Beat> = VecDeque::new();
    let mut assembly: Vec<u8> = Vec::new();
    let mut asic_tx: VecDeque<u128> = VecDeque::new();
    let mut asic_frames = 0u64;

    let mut io = dut.io_frame();
    let idle = idle_word();
    let mut last_progress = 0u64;
    let mut cycle = 0u64;

    while report.frames_received + report.framing_errors < cfg.n_frames {
        if host_tx.is_empty() && report.frames_sent < cfg.n_frames && credits >= frame_beats {
            let mut payload = vec![0u8; cfg.frame_len];
            gen.fill(&mut payload);
            host_tx.extend(stream_frame(&payload, cfg.max_payload)?);
            in_flight.push_back(payload);
            credits -= frame_beats;
            report.frames_sent += 1;
        }
        let sent_down = host_tx.pop_front();
        let mut progress = sent_down.is_some();
        if let Some(w) = down.tick(Some(sent_down.unwrap_or(idle))) {
            if let Some(payload) = asic_rx.push(w)? {
                rx_fifo.extend(beats(&payload));
            }
        }

        let m_ready = ready.at(cycle);
        let head = rx_fifo.front().copied();
        let b = head.unwrap_or(Beat { data: 0, keep: 0, last: false });
        io.set_input_word(Bank::East, TDATA, 32, b.data as u64);
        io.set_input_word(Bank::East, TKEEP, 4, b.keep as u64);
        io.east_in[TLAST] = b.last;
        io.east_in[TVALID] = head.is_some();
        io.east_in[TREADY] = m_ready;
        let out = dut.step(&io);

        let mut freed = 0;
        if head.is_some() && out.east_out[TREADY] {
            rx_fifo.pop_front();
            freed = 1;
            progress = true;
        }
        if out.east_out[TVALID] && m_ready {
            let data = (out.output_word(Bank::East, TDATA, 32) as u32).to_le_bytes();
            let keep = out.output_word(Bank::East, TKEEP, 4);
            assembly.extend((0..4).filter(|i| keep >> i & 1 == 1).map(|i| data[i]));
            if out.east_out[TLAST] {
                let mut words = stream_frame(&assembly, cfg.max_payload)?;
                if let Some(bits) = cfg.faults.flips.get(&asic_frames) {
                    bits.iter().for_each(|&bit| flip_payload_bit(&mut words, bit));
                }
                asic_tx.extend(words);
                assembly.clear();
                asic_frames += 1;
            }
            progress = true;
        }
        credits += credit_link.tick(Some(freed)).unwrap_or(0);

        let sent_up = asic_tx.pop_front();
        progress |= sent_up.is_some();
        if let Some(w) = up.tick(Some(sent_up.unwrap_or(idle))) {
            let received = match host_rx.push(w) {
                Ok(Some(p)) => Some((p, true)),
                Ok(None) => None,
                Err(LinkError::CrcMismatch { .. }) => {
                    report.crc_errors += 1;
                    host_rx.take_rejected().map(|p| (p, false))
                }
                Err(_) => {
                    report.framing_errors += 1;
                    in_flight.pop_front();
                    None
                }
            };
            if let Some((payload, crc_ok)) = received {
                let sent = in_flight.pop_front().unwrap_or_default();
                report.frames_received += 1;
                let diff: u64 = payload.iter().zip(&sent).map(|(a, b)| (a ^ b).count_ones() as u64).sum::<u64>()
                    + 8 * payload.len().abs_diff(sent.len()) as u64;
                report.bits_compared += 8 * sent.len() as u64;
                report.bit_errors += diff;
                if diff != 0 {
                    report.payload_mismatches += 1;
                }
                if crc_ok && diff == 0 {
                    report.frames_ok += 1;
                }
                let mut checker = PrbsChecker::new(PrbsPoly::PRBS31);
                checker.push_bytes(&payload);
                report.prbs_errors += checker.report().errors;
            }
        }

        cycle += 1;
        if progress {
            last_progress = cycle;
        } else if cycle - last_progress > cfg.stall_budget {
            return Err(LinkError::Deadlock { cycle, idle: cycle - last_progress });
        }
    }
    report.cycles = cycle;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_file_parses() {
        let s: FaultSchedule = "# frame bit\n7 100\n\n7 3 # again\n12 0\n".parse().unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.flips[&7], vec![100, 3]);
        assert!("1 2 3".parse::<FaultSchedule>().is_err());
        assert!("x 2".parse::<FaultSchedule>().is_err());
    }

    #[test]
    fn beats_carry_keep_and_last() {
        let b = beats(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].data, b[0].keep, b[0].last), (0x0403_0201, 0xF, false));
        assert_eq!((b[1].data, b[1].keep, b[1].last), (0x0605, 0x3, true));
    }

    #[test]
    fn fault_position_follows_prbs_bit_order() {
        let mut words = stream_frame(&[0u8; 16], 64).unwrap();
        flip_payload_bit(&mut words, 8 * 9);
        let p = crate::stream::stream_parse(&words, 64);
        assert!(matches!(p, Err(LinkError::CrcMismatch { .. })));
        let (block, _) = crate::line66::decode_64b66b(words[2]).unwrap();
        assert_eq!(block[1], 0x80);
    }
}

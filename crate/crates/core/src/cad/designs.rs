// SPDX-License-Identifier: Apache-2.0

//! Built-in test designs, expressed directly as netlists.

use super::netlist::{NetId, Netlist, PinConstraint};
use crate::arch::DSP_OPERAND_BITS;

/// Truth table of `f` over the four LUT inputs (input 0 = index LSB).
pub fn truth_table(f: impl Fn([bool; 4]) -> bool) -> u16 {
    (0..16u16).fold(0, |tt, i| {
        let bits = [i & 1 != 0, i & 2 != 0, i & 4 != 0, i & 8 != 0];
        tt | (f(bits) as u16) << i
    })
}

/// Free-running 16-bit counter on west output pins 0..16 (`count[i]`).
pub fn counter16() -> Netlist {
    let mut nl = Netlist::new("counter16");
    let q: Vec<NetId> = (0..16).map(|i| nl.add_net(&format!("q[{i}]"))).collect();
    let not = truth_table(|x| !x[0]);
    let xor = truth_table(|x| x[0] ^ x[1]);
    let and = truth_table(|x| x[0] & x[1]);
    // carry into bit i is q[0] & .. & q[i-1]
    let mut carry: Option<NetId> = None;
    for i in 0..16 {
        let next = match carry {
            None => nl.add_lut(&format!("inc{i}"), not, &[q[i]]),
            Some(c) => nl.add_lut(&format!("inc{i}"), xor, &[q[i], c]),
        };
        nl.add_dff_into(&format!("cnt{i}"), next, q[i]);
        if i < 15 {
            carry = Some(match carry {
                None => q[0],
                Some(c) => nl.add_lut(&format!("carry{}", i + 1), and, &[c, q[i]]),
            });
        }
        nl.add_output(&format!("count[{i}]"), q[i], Some(PinConstraint::west(i)));
    }
    nl
}

/// East-bank pin assignment shared by the loopback design and the link harness.
pub mod loopback_pins {
    pub const TDATA: usize = 0;
    pub const TKEEP: usize = 32;
    pub const TLAST: usize = 36;
    pub const TVALID: usize = 37;
    /// Input side: `m_tready` from the downstream consumer. Output side: `s_tready`.
    pub const TREADY: usize = 38;
}

/// One AXI-stream register stage with ready/valid back pressure.
///
/// Inputs `s_tdata[32]`, `s_tkeep[4]`, `s_tlast`, `s_tvalid`, `m_tready`;
/// outputs `m_tdata[32]`, `m_tkeep[4]`, `m_tlast`, `m_tvalid`, `s_tready`.
/// All on the east bank at [`loopback_pins`].
pub fn loopback32() -> Netlist {
    use loopback_pins::*;
    let mut nl = Netlist::new("loopback32");
    let pin = PinConstraint::east;
    let mut s_data = Vec::new();
    for i in 0..32 {
        s_data.push((format!("tdata[{i}]"), nl.add_input(&format!("s_tdata[{i}]"), Some(pin(TDATA + i)))));
    }
    for i in 0..4 {
        s_data.push((format!("tkeep[{i}]"), nl.add_input(&format!("s_tkeep[{i}]"), Some(pin(TKEEP + i)))));
    }
    s_data.push(("tlast".into(), nl.add_input("s_tlast", Some(pin(TLAST)))));
    let s_valid = nl.add_input("s_tvalid", Some(pin(TVALID)));
    let m_ready = nl.add_input("m_tready", Some(pin(TREADY)));

    let valid_q = nl.add_net("valid_q");
    let s_ready = nl.add_lut("s_ready", truth_table(|x| !x[0] | x[1]), &[valid_q, m_ready]);
    let load = nl.add_lut("load", truth_table(|x| x[0] & (!x[1] | x[2])), &[s_valid, valid_q, m_ready]);
    let valid_next = nl.add_lut(
        "valid_next",
        truth_table(|x| (x[0] & (!x[1] | x[2])) | (x[1] & !x[2])),
        &[s_valid, valid_q, m_ready],
    );
    nl.add_dff_into("valid_reg", valid_next, valid_q);

    let hold = truth_table(|x| if x[2] { x[0] } else { x[1] });
    let mut offset = 0;
    for (name, s) in s_data {
        let q = nl.add_net(&format!("{name}_q"));
        let next = nl.add_lut(&format!("{name}_next"), hold, &[s, q, load]);
        nl.add_dff_into(&format!("{name}_reg"), next, q);
        nl.add_output(&format!("m_{name}"), q, Some(pin(TDATA + offset)));
        offset += 1;
    }
    nl.add_output("m_tvalid", valid_q, Some(pin(TVALID)));
    nl.add_output("s_tready", s_ready, Some(pin(TREADY)));
    nl
}

/// A DSP multiply-accumulate exposed on the west bank: inputs `a[8]`,
/// `b[8]`, `clr` on pins 0..17, accumulator `acc[20]` on output pins 0..20.
pub fn dsp_mac_test() -> Netlist {
    let mut nl = Netlist::new("dsp_mac");
    let a: Vec<NetId> =
        (0..DSP_OPERAND_BITS).map(|i| nl.add_input(&format!("a[{i}]"), Some(PinConstraint::west(i)))).collect();
    let b: Vec<NetId> = (0..DSP_OPERAND_BITS)
        .map(|i| nl.add_input(&format!("b[{i}]"), Some(PinConstraint::west(DSP_OPERAND_BITS + i))))
        .collect();
    let clr = nl.add_input("clr", Some(PinConstraint::west(2 * DSP_OPERAND_BITS)));
    let acc = nl.add_dsp("mac", &a, &b, clr);
    for (i, n) in acc.into_iter().enumerate() {
        nl.add_output(&format!("acc[{i}]"), n, Some(PinConstraint::west(i)));
    }
    nl
}

/// Packs a little-endian bit vector into an integer.
pub fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u64) << i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cad::netlist_sim::NetlistSim;

    #[test]
    fn truth_tables() {
        assert_eq!(truth_table(|x| x[0]), 0xAAAA);
        assert_eq!(truth_table(|x| x[0] & x[1] & x[2] & x[3]), 0x8000);
        assert_eq!(truth_table(|x| x[0] ^ x[1] ^ x[2] ^ x[3]), 0x6996);
    }

    #[test]
    fn designs_validate() {
        for nl in [counter16(), loopback32(), dsp_mac_test()] {
            nl.validate().unwrap();
        }
    }

    #[test]
    fn loopback_holds_under_back_pressure() {
        let nl = loopback32();
        let mut sim = NetlistSim::new(&nl).unwrap();
        let n = nl.inputs().len();
        let frame = |data: u32, valid: bool, ready: bool| {
            let mut v = vec![false; n];
            for (i, b) in v.iter_mut().enumerate().take(32) {
                *b = data >> i & 1 != 0;
            }
            v[37] = valid;
            v[38] = ready;
            v
        };
        // outputs: m_tdata 0..32, keep 32..36, last 36, m_tvalid 37, s_tready 38
        sim.step(&frame(0xDEAD_BEEF, true, false));
        // stalled downstream: the word is held and upstream sees not-ready
        for _ in 0..10 {
            let out = sim.step(&frame(0x1234_5678, true, false));
            assert_eq!(bits_to_u64(&out[..32]), 0xDEAD_BEEF);
            assert!(out[37]);
            assert!(!out[38]);
        }
        let out = sim.step(&frame(0x1234_5678, true, true));
        assert!(out[38]);
        let out = sim.step(&frame(0, false, true));
        assert_eq!(bits_to_u64(&out[..32]), 0x1234_5678);
    }
}

// SPDX-License-Identifier: Apache-2.0

use efab_core::cad::{designs, run_flow, Flow};
use efab_core::sim::{self, FabricState};
use efab_core::FabricLayout;
use efab_link::{run_loopback, FaultSchedule, LinkError, LoopbackConfig, NetlistDut, ReadyPattern};

fn loopback_fabric() -> (Flow, FabricState) {
    let layout = FabricLayout::cmos28();
    let flow = run_flow(&designs::loopback32(), &layout, 1).unwrap();
    let fabric = sim::load(&layout, &flow.image).unwrap();
    (flow, fabric)
}

fn frames(n: u64) -> LoopbackConfig {
    LoopbackConfig { n_frames: n, ..LoopbackConfig::default() }
}

#[test]
fn thousand_clean_frames() {
    let (_, mut fabric) = loopback_fabric();
    let r = run_loopback(&mut fabric, &frames(1000)).unwrap();
    assert_eq!((r.frames_sent, r.frames_received, r.frames_ok), (1000, 1000, 1000));
    assert_eq!((r.bit_errors, r.crc_errors, r.payload_mismatches, r.prbs_errors), (0, 0, 0, 0));
    assert_eq!(r.bits_compared, 1000 * 256 * 8);
    // the fabric moves one 4-octet beat per cycle when never stalled
    assert!(r.cycles < 1000 * 64 + 500, "{}", r.cycles);
}

#[test]
fn single_flip_costs_exactly_one_frame() {
    let (_, mut fabric) = loopback_fabric();
    let cfg = LoopbackConfig { faults: FaultSchedule::new([(7, 1234)]), ..frames(1000) };
    let r = run_loopback(&mut fabric, &cfg).unwrap();
    assert_eq!(r.crc_errors, 1);
    assert_eq!(r.frames_ok, 999);
    assert_eq!(r.frames_received, 1000);
    assert_eq!((r.bit_errors, r.payload_mismatches, r.prbs_errors), (1, 1, 1));
}

#[test]
fn fault_file_drives_the_schedule() {
    let (_, mut fabric) = loopback_fabric();
    let faults: FaultSchedule = "# frame bit\n2 100\n2 900\n5 2047\n".parse().unwrap();
    let cfg = LoopbackConfig { faults, ..frames(8) };
    let r = run_loopback(&mut fabric, &cfg).unwrap();
    assert_eq!((r.crc_errors, r.frames_ok, r.bit_errors, r.prbs_errors), (2, 6, 3, 3));
}

#[test]
fn faults_outside_the_run_are_rejected() {
    let (_, mut fabric) = loopback_fabric();
    let late = LoopbackConfig { faults: FaultSchedule::new([(9, 0)]), ..frames(5) };
    assert!(matches!(run_loopback(&mut fabric, &late), Err(LinkError::Malformed(_))));
    let wide = LoopbackConfig { faults: FaultSchedule::new([(0, 256 * 8)]), ..frames(5) };
    assert!(matches!(run_loopback(&mut fabric, &wide), Err(LinkError::Malformed(_))));
}

#[test]
fn ten_cycle_stall_mid_frame_matches_reference_model() {
    let (flow, mut fabric) = loopback_fabric();
    let nl = designs::loopback32();
    // the first frame reaches the fabric around cycle 45; stall its middle
    let cfg = LoopbackConfig { ready: ReadyPattern::Stalls(vec![(70, 10)]), ..frames(20) };
    let r = run_loopback(&mut fabric, &cfg).unwrap();
    assert_eq!((r.frames_ok, r.bit_errors, r.crc_errors), (20, 0, 0));

    let mut golden = NetlistDut::new(&nl, flow.ports.clone(), fabric.io_frame()).unwrap();
    let g = run_loopback(&mut golden, &cfg).unwrap();
    assert_eq!(r, g);

    let unstalled = run_loopback(&mut loopback_fabric().1, &frames(20)).unwrap();
    assert_eq!(r.cycles, unstalled.cycles + 10);
}

#[test]
fn random_backpressure_delivers_every_octet() {
    let (flow, mut fabric) = loopback_fabric();
    let nl = designs::loopback32();
    for (seed, p) in [(1, 0.5), (2, 0.1), (3, 0.9)] {
        let cfg = LoopbackConfig {
            ready: ReadyPattern::Random { probability: p, seed },
            frame_len: 61,
            ..frames(40)
        };
        fabric.reset();
        let r = run_loopback(&mut fabric, &cfg).unwrap();
        assert_eq!((r.frames_ok, r.bit_errors), (40, 0), "p={p}");
        let mut golden = NetlistDut::new(&nl, flow.ports.clone(), fabric.io_frame()).unwrap();
        assert_eq!(run_loopback(&mut golden, &cfg).unwrap(), r);
    }
}

#[test]
fn receiver_that_never_becomes_ready_deadlocks() {
    let (_, mut fabric) = loopback_fabric();
    let cfg = LoopbackConfig { ready: ReadyPattern::Never, stall_budget: 500, ..frames(3) };
    assert!(matches!(run_loopback(&mut fabric, &cfg), Err(LinkError::Deadlock { idle: 501, .. })));
}

#[test]
fn report_renders_as_table() {
    let (_, mut fabric) = loopback_fabric();
    let r = run_loopback(&mut fabric, &frames(2)).unwrap();
    let text = r.to_string();
    assert!(text.contains("frames ok"));
    assert!(text.lines().count() >= 10);
}

#[test]
fn empty_frames_pass_through() {
    let (_, mut fabric) = loopback_fabric();
    let cfg = LoopbackConfig { frame_len: 0, ..frames(10) };
    let r = run_loopback(&mut fabric, &cfg).unwrap();
    assert_eq!((r.frames_sent, r.frames_received, r.frames_ok), (10, 10, 10));
    assert_eq!((r.bit_errors, r.bits_compared, r.crc_errors), (0, 0, 0));
}

#[test]
fn short_frames_under_backpressure() {
    let (flow, mut fabric) = loopback_fabric();
    let nl = designs::loopback32();
    for len in [1, 3, 4, 5] {
        let cfg = LoopbackConfig { frame_len: len, ready: ReadyPattern::Random { probability: 0.5, seed: len as u64 }, ..frames(30) };
        fabric.reset();
        let r = run_loopback(&mut fabric, &cfg).unwrap();
        assert_eq!((r.frames_ok, r.bit_errors), (30, 0), "len {len}");
        let mut golden = NetlistDut::new(&nl, flow.ports.clone(), fabric.io_frame()).unwrap();
        assert_eq!(run_loopback(&mut golden, &cfg).unwrap(), r);
    }
}

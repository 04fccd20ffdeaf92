// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use efab_core::cad::{designs, run_flow};
use efab_core::FabricLayout;
use efab_link::control::{control_transact, ReplyStatus};
use efab_link::regmap::*;
use efab_link::{ControlFrame, ControlLink, LinkError, RegisterMap};
use proptest::prelude::*;

fn link(latency: usize) -> ControlLink {
    ControlLink::new(RegisterMap::new(FabricLayout::cmos28()), latency)
}

#[test]
fn scratch_and_read_only_words_over_the_link() {
    let mut l = link(5);
    l.write(SCRATCH, 0x1234_5678).unwrap();
    assert_eq!(l.read(SCRATCH).unwrap(), 0x1234_5678);
    let hash = l.read(GIT_HASH).unwrap();
    assert_eq!(hash, git_hash_word());
    l.write(GIT_HASH, hash ^ 0xFFFF_FFFF).unwrap();
    assert_eq!(l.read(GIT_HASH).unwrap(), hash);
    assert_eq!(l.read(REVISION).unwrap(), revision_word());
}

#[test]
fn unmapped_address_faults_over_the_link() {
    let mut l = link(1);
    assert_eq!(l.read(0x4000_0000), Err(LinkError::UnmappedAddress(0x4000_0000)));
    // the link stays usable afterwards
    l.write(SCRATCH, 9).unwrap();
    assert_eq!(l.read(SCRATCH).unwrap(), 9);
}

#[test]
fn corrupted_crc_is_rejected_without_side_effects() {
    let mut l = link(2);
    l.write(SCRATCH, 1).unwrap();
    let mut bad = ControlFrame::write(SCRATCH, 2);
    bad.crc8 ^= 0x5A;
    let reply = l.transact(&bad).unwrap();
    assert_eq!(reply.status, ReplyStatus::CrcError);
    assert_eq!(l.read(SCRATCH).unwrap(), 1);

    let mut regs = RegisterMap::new(FabricLayout::cmos28());
    assert!(matches!(control_transact(&bad, &mut regs), Err(LinkError::CrcError { .. })));
}

#[test]
fn counter_image_over_the_control_link() {
    let layout = FabricLayout::cmos28();
    let flow = run_flow(&designs::counter16(), &layout, 1).unwrap();
    let mut l = ControlLink::new(RegisterMap::new(layout), 4);
    for chunk in flow.image.chunks(4) {
        let mut w = [0u8; 4];
        w[..chunk.len()].copy_from_slice(chunk);
        l.write(WINDOW, u32::from_le_bytes(w)).unwrap();
    }
    l.write(IMAGE_LENGTH, flow.image.len() as u32).unwrap();
    assert_eq!(l.read(STATUS).unwrap() & STATUS_CONFIGURED, 0);
    l.write(CONTROL, CONTROL_COMMIT).unwrap();
    assert_eq!(l.read(STATUS).unwrap(), STATUS_CONFIGURED);
    assert_eq!(l.read(USER_OUT).unwrap(), 0);
    l.regs.step_fabric(5);
    assert_eq!(l.read(USER_OUT).unwrap(), 0x0005);
    l.write(CONTROL, CONTROL_RESET).unwrap();
    assert_eq!(l.read(USER_OUT).unwrap(), 0);
}

#[test]
fn truncated_image_commit_reports_decode_error() {
    let layout = FabricLayout::cmos28();
    let flow = run_flow(&designs::counter16(), &layout, 1).unwrap();
    let mut l = ControlLink::new(RegisterMap::new(layout), 0);
    for chunk in flow.image[..64].chunks(4) {
        l.write(WINDOW, u32::from_le_bytes(chunk.try_into().unwrap())).unwrap();
    }
    let err = l.write(CONTROL, CONTROL_COMMIT).unwrap_err();
    assert!(matches!(err, LinkError::ConfigCommitFailed(_)), "{err:?}");
    assert_eq!(l.read(STATUS).unwrap(), STATUS_COMMIT_FAILED);
}

#[test]
fn register_dump_lists_every_register() {
    let mut m = RegisterMap::new(FabricLayout::cmos28());
    m.write(SCRATCH, 0xABCD).unwrap();
    let dump = m.dump();
    assert_eq!(dump.lines().count(), 1 + 7 + 8);
    assert!(dump.contains("0x00000008 scratch        0x0000ABCD"));
}

#[derive(Clone, Debug)]
enum Op {
    Read(u32),
    Write(u32, u32),
}

fn rw_address() -> impl Strategy<Value = u32> {
    prop_oneof![
        Just(SCRATCH),
        Just(IMAGE_LENGTH),
        (0..USER_BUSES as u32).prop_map(|i| USER_IN + 4 * i),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The register map behaves as an in-order memory for any interleaving.
    #[test]
    fn register_map_is_sequentially_consistent(
        latency in 0usize..12,
        ops in proptest::collection::vec(
            prop_oneof![
                rw_address().prop_map(Op::Read),
                (rw_address(), any::<u32>()).prop_map(|(a, d)| Op::Write(a, d)),
            ],
            1..40,
        ),
    ) {
        let mut l = link(latency);
        let mut model: BTreeMap<u32, u32> = BTreeMap::new();
        for op in ops {
            match op {
                Op::Write(a, d) => {
                    l.write(a, d).unwrap();
                    model.insert(a, d);
                }
                Op::Read(a) => prop_assert_eq!(l.read(a).unwrap(), model.get(&a).copied().unwrap_or(0)),
            }
        }
    }
}

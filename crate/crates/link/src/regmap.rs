// SPDX-License-Identifier: Apache-2.0

//! Register crossbar behind the control link.
//!
//! | address       | name        | access |
//! |---------------|-------------|--------|
//! | `0x0000_0000` | git hash    | RO     |
//! | `0x0000_0004` | revision    | RO     |
//! | `0x0000_0008` | scratch     | RW     |
//! | `0x0001_0000` | control     | RW, bit 0 fabric reset, bit 1 config enable (both self-clearing) |
//! | `0x0001_0004` | status      | RO, bit 0 configured, bit 1 last commit failed |
//! | `0x0001_0008` | window      | WO, appends 4 octets (LE) to the staged image; reads give the staged length |
//! | `0x0001_000C` | image length| RW, octets of the staged image to commit (0 = all) |
//! | `0x0001_0010` | user in 0..3 | RW, drive west inputs 32i..32i+31 |
//! | `0x0001_0020` | user out 0..3 | RO, west outputs 32i..32i+31 |

use std::fmt::Write as _;

use efab_core::sim::{self, Bank, FabricState, IoFrame};
use efab_core::FabricLayout;

use crate::LinkError;

pub const GIT_HASH: u32 = 0x0000_0000;
pub const REVISION: u32 = 0x0000_0004;
pub const SCRATCH: u32 = 0x0000_0008;
pub const FABRIC_BASE: u32 = 0x0001_0000;
pub const CONTROL: u32 = FABRIC_BASE;
pub const STATUS: u32 = FABRIC_BASE + 0x4;
pub const WINDOW: u32 = FABRIC_BASE + 0x8;
pub const IMAGE_LENGTH: u32 = FABRIC_BASE + 0xC;
pub const USER_IN: u32 = FABRIC_BASE + 0x10;
pub const USER_OUT: u32 = FABRIC_BASE + 0x20;
pub const USER_BUSES: usize = 4;

pub const CONTROL_RESET: u32 = 1 << 0;
pub const CONTROL_COMMIT: u32 = 1 << 1;
pub const STATUS_CONFIGURED: u32 = 1 << 0;
pub const STATUS_COMMIT_FAILED: u32 = 1 << 1;

/// Revision word: major << 16 | minor << 8 | patch of this crate.
pub fn revision_word() -> u32 {
    let part = |s: &str| s.parse::<u32>().unwrap_or(0);
    part(env!("CARGO_PKG_VERSION_MAJOR")) << 16
        | part(env!("CARGO_PKG_VERSION_MINOR")) << 8
        | part(env!("CARGO_PKG_VERSION_PATCH"))
}

/// First eight hex digits of the commit the crate was built from.
pub fn git_hash_word() -> u32 {
    u32::from_str_radix(env!("EFAB_GIT_HASH"), 16).unwrap_or(0)
}

pub struct RegisterMap {
    layout: FabricLayout,
    git_hash: u32,
    revision: u32,
    scratch: u32,
    staged: Vec<u8>,
    image_length: u32,
    commit_failed: bool,
    user_in: [u32; USER_BUSES],
    fabric: Option<FabricState>,
    io: IoFrame,
}

impl RegisterMap {
    pub fn new(layout: FabricLayout) -> Self {
        let io = IoFrame::new(&layout);
        RegisterMap {
            layout,
            git_hash: git_hash_word(),
            revision: revision_word(),
            scratch: 0,
            staged: Vec::new(),
            image_length: 0,
            commit_failed: false,
            user_in: [0; USER_BUSES],
            fabric: None,
            io,
        }
    }

    pub fn read(&mut self, addr: u32) -> Result<u32, LinkError> {
        Ok(match addr {
            GIT_HASH => self.git_hash,
            REVISION => self.revision,
            SCRATCH => self.scratch,
            CONTROL => 0,
            STATUS => {
                (self.fabric.is_some() as u32) * STATUS_CONFIGURED | (self.commit_failed as u32) * STATUS_COMMIT_FAILED
            }
            WINDOW => self.staged.len() as u32,
            IMAGE_LENGTH => self.image_length,
            a if (USER_IN..USER_IN + 4 * USER_BUSES as u32).contains(&a) && a % 4 == 0 => {
                self.user_in[((a - USER_IN) / 4) as usize]
            }
            a if (USER_OUT..USER_OUT + 4 * USER_BUSES as u32).contains(&a) && a % 4 == 0 => {
                self.user_output(((a - USER_OUT) / 4) as usize)
            }
            a => return Err(LinkError::UnmappedAddress(a)),
        })
    }

    pub fn write(&mut self, addr: u32, value: u32) -> Result<(), LinkError> {
        match addr {
            GIT_HASH | REVISION | STATUS => {}
            a if (USER_OUT..USER_OUT + 4 * USER_BUSES as u32).contains(&a) && a % 4 == 0 => {}
            SCRATCH => self.scratch = value,
            CONTROL => {
                if value & CONTROL_RESET != 0 {
                    if let Some(f) = self.fabric.as_mut() {
                        f.reset();
                    }
                }
                if value & CONTROL_COMMIT != 0 {
                    self.commit()?;
                }
            }
            WINDOW => self.staged.extend_from_slice(&value.to_le_bytes()),
            IMAGE_LENGTH => self.image_length = value,
            a if (USER_IN..USER_IN + 4 * USER_BUSES as u32).contains(&a) && a % 4 == 0 => {
                let bus = ((a - USER_IN) / 4) as usize;
                self.user_in[bus] = value;
                let width = self.io.west_in.len();
                let offset = 32 * bus;
                if offset < width {
                    self.io.set_input_word(Bank::West, offset, (width - offset).min(32), value as u64);
                }
            }
            a => return Err(LinkError::UnmappedAddress(a)),
        }
        Ok(())
    }

    fn commit(&mut self) -> Result<(), LinkError> {
        let mut image = std::mem::take(&mut self.staged);
        if self.image_length != 0 {
            image.truncate(self.image_length as usize);
        }
        match sim::load(&self.layout, &image) {
            Ok(f) => {
                self.fabric = Some(f);
                self.commit_failed = false;
                Ok(())
            }
            Err(e) => {
                self.fabric = None;
                self.commit_failed = true;
                Err(LinkError::ConfigCommitFailed(e))
            }
        }
    }

    fn user_output(&mut self, bus: usize) -> u32 {
        let Some(fabric) = self.fabric.as_mut() else { return 0 };
        let out = fabric.peek(&self.io);
        let width = out.west_out.len();
        let offset = 32 * bus;
        if offset >= width {
            return 0;
        }
        out.output_word(Bank::West, offset, (width - offset).min(32)) as u32
    }

    /// Clocks the attached fabric with the current user inputs.
    pub fn step_fabric(&mut self, cycles: u64) {
        if let Some(f) = self.fabric.as_mut() {
            for _ in 0..cycles {
                f.step(&self.io);
            }
        }
    }

    pub fn fabric(&self) -> Option<&FabricState> {
        self.fabric.as_ref()
    }

    pub fn fabric_mut(&mut self) -> Option<&mut FabricState> {
        self.fabric.as_mut()
    }

    pub fn layout(&self) -> &FabricLayout {
        &self.layout
    }

    /// Text table of every readable register.
    pub fn dump(&mut self) -> String {
        let mut rows: Vec<(u32, String)> = vec![
            (GIT_HASH, "git_hash".into()),
            (REVISION, "revision".into()),
            (SCRATCH, "scratch".into()),
            (CONTROL, "control".into()),
            (STATUS, "status".into()),
            (WINDOW, "window".into()),
            (IMAGE_LENGTH, "image_length".into()),
        ];
        for i in 0..USER_BUSES as u32 {
            rows.push((USER_IN + 4 * i, format!("user_in{i}")));
        }
        for i in 0..USER_BUSES as u32 {
            rows.push((USER_OUT + 4 * i, format!("user_out{i}")));
        }
        let mut s = format!("{:<10} {:<14} {:>10}\n", "address", "register", "value");
        for (addr, name) in rows {
            let v = self.read(addr).expect("listed registers are mapped");
            let _ = writeln!(s, "0x{addr:08X} {name:<14} 0x{v:08X}");
        }
        s
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Write};

use super::io::IoFrame;

/// Value-change recording of the IO outputs and the used flip-flops.
#[derive(Clone, Debug)]
pub struct VcdTrace {
    names: Vec<String>,
    ffs: Vec<usize>,
    last: Vec<bool>,
    changes: Vec<(u64, u32, bool)>,
    started: bool,
}

impl VcdTrace {
    pub(crate) fn new(template: &IoFrame, ffs: Vec<usize>) -> Self {
        let mut names: Vec<String> = Vec::new();
        names.extend((0..template.west_out.len()).map(|i| format!("west_out_{i}")));
        names.extend((0..template.east_out.len()).map(|i| format!("east_out_{i}")));
        names.extend(ffs.iter().map(|i| format!("ff_{i}")));
        let n = names.len();
        VcdTrace { names, ffs, last: vec![false; n], changes: Vec::new(), started: false }
    }

    pub(crate) fn record(&mut self, cycle: u64, out: &IoFrame, ff_values: &[bool]) {
        let now = out
            .west_out
            .iter()
            .chain(&out.east_out)
            .copied()
            .chain(self.ffs.iter().map(|&i| ff_values[i]));
        for (i, v) in now.enumerate() {
            if !self.started || self.last[i] != v {
                self.changes.push((cycle, i as u32, v));
                self.last[i] = v;
            }
        }
        self.started = true;
    }

    pub fn change_count(&self) -> usize {
        self.changes.len()
    }

    /// Writes the trace as a VCD file with one time unit per clock cycle.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "$timescale 1ns $end")?;
        writeln!(w, "$scope module fabric $end")?;
        for (i, name) in self.names.iter().enumerate() {
            writeln!(w, "$var wire 1 {} {} $end", ident(i), name)?;
        }
        writeln!(w, "$upscope $end")?;
        writeln!(w, "$enddefinitions $end")?;
        let mut t = None;
        for &(cycle, i, v) in &self.changes {
            if t != Some(cycle) {
                writeln!(w, "#{cycle}")?;
                t = Some(cycle);
            }
            writeln!(w, "{}{}", v as u8, ident(i as usize))?;
        }
        Ok(())
    }
}

/// Short printable identifier from the VCD code range '!'..='~'.
fn ident(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'!' + (i % 94) as u8) as char);
        i /= 94;
        if i == 0 {
            return s;
        }
        i -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_are_unique() {
        let ids: std::collections::BTreeSet<String> = (0..20_000).map(ident).collect();
        assert_eq!(ids.len(), 20_000);
    }
}

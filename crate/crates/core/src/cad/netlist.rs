// SPDX-License-Identifier: Apache-2.0

//! Netlist intermediate representation and its text form.
//!
//! ```text
//! # comment
//! netlist <name>
//! net <net>
//! input <port> <net> [@west:N | @east:N]
//! output <port> <net> [@west:N | @east:N]
//! const <cell> <0|1> <out>
//! lut <cell> 0xHHHH <out> <i0> <i1> <i2> <i3>
//! dff <cell> <q> <d>
//! dsp <cell> <acc0,..,acc19> <a0,..,a7> <b0,..,b7> <clr>
//! ```
//!
//! Nets are created on first mention; `net` lines only declare them.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::arch::{DSP_ACC_BITS, DSP_INPUTS, DSP_OPERAND_BITS, LUT_INPUTS};
use crate::sim::Bank;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Lut4 { truth_table: u16 },
    Dff,
    DspMac,
    InPort,
    OutPort,
    Const(bool),
}

impl CellKind {
    pub fn input_count(self) -> usize {
        match self {
            CellKind::Lut4 { .. } => LUT_INPUTS,
            CellKind::Dff | CellKind::OutPort => 1,
            CellKind::DspMac => DSP_INPUTS,
            CellKind::InPort | CellKind::Const(_) => 0,
        }
    }

    pub fn output_count(self) -> usize {
        match self {
            CellKind::Lut4 { .. } | CellKind::Dff | CellKind::InPort | CellKind::Const(_) => 1,
            CellKind::DspMac => DSP_ACC_BITS,
            CellKind::OutPort => 0,
        }
    }
}

/// Fixed IO location of a port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PinConstraint {
    pub bank: Bank,
    pub index: usize,
}

impl PinConstraint {
    pub fn west(index: usize) -> Self {
        PinConstraint { bank: Bank::West, index }
    }

    pub fn east(index: usize) -> Self {
        PinConstraint { bank: Bank::East, index }
    }
}

impl fmt::Display for PinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}:{}", self.bank.name(), self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub name: String,
    pub kind: CellKind,
    pub inputs: Vec<Option<NetId>>,
    pub outputs: Vec<NetId>,
    pub pin: Option<PinConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Net {
    pub name: String,
    pub driver: Option<(CellId, usize)>,
    pub sinks: Vec<(CellId, usize)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetlistError {
    #[error("net {0:?} has more than one driver")]
    MultipleDrivers(String),
    #[error("net {0:?} has no driver")]
    UndrivenNet(String),
    #[error("input {pin} of cell {cell:?} is not connected")]
    UnconnectedPin { cell: String, pin: usize },
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("combinational loop through net {0:?}")]
    CombinationalLoop(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    cells: Vec<Cell>,
    nets: Vec<Net>,
    net_names: BTreeMap<String, NetId>,
    cell_names: BTreeMap<String, CellId>,
    gnd: Option<NetId>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Netlist { name: name.into(), ..Default::default() }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.0 as usize]
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.0 as usize]
    }

    pub fn net_by_name(&self, name: &str) -> Option<NetId> {
        self.net_names.get(name).copied()
    }

    pub fn cell_by_name(&self, name: &str) -> Option<CellId> {
        self.cell_names.get(name).copied()
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> {
        (0..self.cells.len() as u32).map(CellId)
    }

    pub fn net_ids(&self) -> impl Iterator<Item = NetId> {
        (0..self.nets.len() as u32).map(NetId)
    }

    /// Input ports in creation order.
    pub fn inputs(&self) -> Vec<CellId> {
        self.cell_ids().filter(|&c| self.cell(c).kind == CellKind::InPort).collect()
    }

    /// Output ports in creation order.
    pub fn outputs(&self) -> Vec<CellId> {
        self.cell_ids().filter(|&c| self.cell(c).kind == CellKind::OutPort).collect()
    }

    pub fn count(&self, pred: impl Fn(CellKind) -> bool) -> usize {
        self.cells.iter().filter(|c| pred(c.kind)).count()
    }

    /// Number of Lut4 cells.
    pub fn lut_count(&self) -> usize {
        self.count(|k| matches!(k, CellKind::Lut4 { .. }))
    }

    pub fn dff_count(&self) -> usize {
        self.count(|k| k == CellKind::Dff)
    }

    /// The constant a net carries, if its driver is a Const cell.
    pub fn constant(&self, net: NetId) -> Option<bool> {
        let (c, _) = self.net(net).driver?;
        match self.cell(c).kind {
            CellKind::Const(b) => Some(b),
            _ => None,
        }
    }

    /// Returns the named net, creating it if needed.
    pub fn net_named(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.net_names.get(name) {
            return id;
        }
        self.push_net(name.to_string())
    }

    fn push_net(&mut self, name: String) -> NetId {
        let id = NetId(self.nets.len() as u32);
        self.net_names.insert(name.clone(), id);
        self.nets.push(Net { name, driver: None, sinks: Vec::new() });
        id
    }

    /// A fresh net; the name gets a numeric suffix if already taken.
    pub fn add_net(&mut self, name: &str) -> NetId {
        if !self.net_names.contains_key(name) {
            return self.push_net(name.to_string());
        }
        let mut i = 1;
        loop {
            let candidate = format!("{name}${i}");
            if !self.net_names.contains_key(&candidate) {
                return self.push_net(candidate);
            }
            i += 1;
        }
    }

    fn unique_cell_name(&self, name: &str) -> String {
        if !self.cell_names.contains_key(name) {
            return name.to_string();
        }
        (1..).map(|i| format!("{name}${i}")).find(|n| !self.cell_names.contains_key(n)).unwrap()
    }

    /// Adds a cell, wiring its pins. Outputs must not already be driven.
    pub fn add_cell(
        &mut self,
        name: &str,
        kind: CellKind,
        inputs: Vec<NetId>,
        outputs: Vec<NetId>,
        pin: Option<PinConstraint>,
    ) -> Result<CellId, NetlistError> {
        assert_eq!(inputs.len(), kind.input_count(), "input count of {kind:?}");
        assert_eq!(outputs.len(), kind.output_count(), "output count of {kind:?}");
        if self.cell_names.contains_key(name) {
            return Err(NetlistError::DuplicateName(name.to_string()));
        }
        let id = CellId(self.cells.len() as u32);
        for (i, &o) in outputs.iter().enumerate() {
            let net = &mut self.nets[o.0 as usize];
            if net.driver.is_some() {
                return Err(NetlistError::MultipleDrivers(net.name.clone()));
            }
            net.driver = Some((id, i));
        }
        for (i, &n) in inputs.iter().enumerate() {
            self.nets[n.0 as usize].sinks.push((id, i));
        }
        self.cell_names.insert(name.to_string(), id);
        self.cells.push(Cell {
            name: name.to_string(),
            kind,
            inputs: inputs.into_iter().map(Some).collect(),
            outputs,
            pin,
        });
        Ok(id)
    }

    /// Shared constant-0 net used to tie off unused LUT inputs.
    pub fn gnd(&mut self) -> NetId {
        if let Some(g) = self.gnd {
            return g;
        }
        let g = self.constant_net(false);
        self.gnd = Some(g);
        g
    }

    pub fn constant_net(&mut self, value: bool) -> NetId {
        let base = if value { "vcc" } else { "gnd" };
        let net = self.add_net(base);
        let name = self.unique_cell_name(base);
        self.add_cell(&name, CellKind::Const(value), vec![], vec![net], None).unwrap();
        net
    }

    pub fn add_input(&mut self, name: &str, pin: Option<PinConstraint>) -> NetId {
        let net = self.add_net(name);
        let cell = self.unique_cell_name(name);
        self.add_cell(&cell, CellKind::InPort, vec![], vec![net], pin).unwrap();
        net
    }

    pub fn add_output(&mut self, name: &str, net: NetId, pin: Option<PinConstraint>) {
        let cell = self.unique_cell_name(name);
        self.add_cell(&cell, CellKind::OutPort, vec![net], vec![], pin).unwrap();
    }

    /// A LUT over up to four inputs; missing inputs read as 0 in `truth_table`.
    pub fn add_lut(&mut self, name: &str, truth_table: u16, inputs: &[NetId]) -> NetId {
        let out = self.add_net(name);
        self.add_lut_into(name, truth_table, inputs, out);
        out
    }

    pub fn add_lut_into(&mut self, name: &str, truth_table: u16, inputs: &[NetId], out: NetId) {
        assert!(inputs.len() <= LUT_INPUTS);
        let mut ins = inputs.to_vec();
        while ins.len() < LUT_INPUTS {
            ins.push(self.gnd());
        }
        let cell = self.unique_cell_name(name);
        self.add_cell(&cell, CellKind::Lut4 { truth_table }, ins, vec![out], None).unwrap();
    }

    pub fn add_dff(&mut self, name: &str, d: NetId) -> NetId {
        let q = self.add_net(name);
        self.add_dff_into(name, d, q);
        q
    }

    /// A flip-flop driving an existing net, for feedback loops built q-first.
    pub fn add_dff_into(&mut self, name: &str, d: NetId, q: NetId) {
        let cell = self.unique_cell_name(name);
        self.add_cell(&cell, CellKind::Dff, vec![d], vec![q], None).unwrap();
    }

    /// A DSP multiply-accumulate; returns the 20 accumulator nets, LSB first.
    pub fn add_dsp(&mut self, name: &str, a: &[NetId], b: &[NetId], clr: NetId) -> Vec<NetId> {
        assert_eq!(a.len(), DSP_OPERAND_BITS);
        assert_eq!(b.len(), DSP_OPERAND_BITS);
        let acc: Vec<NetId> = (0..DSP_ACC_BITS).map(|i| self.add_net(&format!("{name}.acc[{i}]"))).collect();
        let mut ins = a.to_vec();
        ins.extend_from_slice(b);
        ins.push(clr);
        let cell = self.unique_cell_name(name);
        self.add_cell(&cell, CellKind::DspMac, ins, acc.clone(), None).unwrap();
        acc
    }

    /// Checks the structural invariants, including the absence of combinational loops.
    pub fn validate(&self) -> Result<(), NetlistError> {
        for net in &self.nets {
            if net.driver.is_none() {
                return Err(NetlistError::UndrivenNet(net.name.clone()));
            }
        }
        for cell in &self.cells {
            if let Some(pin) = cell.inputs.iter().position(Option::is_none) {
                return Err(NetlistError::UnconnectedPin { cell: cell.name.clone(), pin });
            }
        }
        self.comb_order().map(|_| ())
    }

    /// LUT cells in evaluation order.
    pub(crate) fn comb_order(&self) -> Result<Vec<CellId>, NetlistError> {
        // Kahn over LUT cells; every other cell output is a source.
        let mut indeg = vec![0usize; self.cells.len()];
        let mut ready = Vec::new();
        for id in self.cell_ids() {
            let cell = self.cell(id);
            if !matches!(cell.kind, CellKind::Lut4 { .. }) {
                continue;
            }
            indeg[id.0 as usize] = cell
                .inputs
                .iter()
                .flatten()
                .filter(|n| self.net(**n).driver.is_some_and(|(d, _)| matches!(self.cell(d).kind, CellKind::Lut4 { .. })))
                .count();
            if indeg[id.0 as usize] == 0 {
                ready.push(id);
            }
        }
        ready.reverse();
        let mut order = Vec::new();
        while let Some(id) = ready.pop() {
            order.push(id);
            for &(sink, _) in &self.net(self.cell(id).outputs[0]).sinks {
                if matches!(self.cell(sink).kind, CellKind::Lut4 { .. }) {
                    indeg[sink.0 as usize] -= 1;
                    if indeg[sink.0 as usize] == 0 {
                        ready.push(sink);
                    }
                }
            }
        }
        let luts = self.lut_count();
        if order.len() < luts {
            let stuck = self
                .cell_ids()
                .find(|c| matches!(self.cell(*c).kind, CellKind::Lut4 { .. }) && indeg[c.0 as usize] > 0)
                .unwrap();
            let net = self.cell(stuck).outputs[0];
            return Err(NetlistError::CombinationalLoop(self.net(net).name.clone()));
        }
        Ok(order)
    }

    /// Longest chain of LUTs between sequential elements or ports.
    pub fn logic_depth(&self) -> Result<usize, NetlistError> {
        let order = self.comb_order()?;
        let mut depth = vec![0usize; self.cells.len()];
        let mut max = 0;
        for id in order {
            let d = 1 + self
                .cell(id)
                .inputs
                .iter()
                .flatten()
                .filter_map(|n| self.net(*n).driver)
                .map(|(c, _)| depth[c.0 as usize])
                .max()
                .unwrap_or(0);
            depth[id.0 as usize] = d;
            max = max.max(d);
        }
        Ok(max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name = |n: &Option<NetId>| n.map_or("?".to_string(), |n| self.net(n).name.clone());
        let list = |ns: &[Option<NetId>]| ns.iter().map(name).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "netlist {}", if self.name.is_empty() { "top" } else { &self.name });
        for net in &self.nets {
            let _ = writeln!(s, "net {}", net.name);
        }
        for c in &self.cells {
            let out = |i: usize| self.net(c.outputs[i]).name.clone();
            let pin = c.pin.map(|p| format!(" {p}")).unwrap_or_default();
            let _ = match c.kind {
                CellKind::InPort => writeln!(s, "input {} {}{}", c.name, out(0), pin),
                CellKind::OutPort => writeln!(s, "output {} {}{}", c.name, name(&c.inputs[0]), pin),
                CellKind::Const(b) => writeln!(s, "const {} {} {}", c.name, b as u8, out(0)),
                CellKind::Lut4 { truth_table } => {
                    let ins: Vec<String> = c.inputs.iter().map(name).collect();
                    writeln!(s, "lut {} {:#06x} {} {}", c.name, truth_table, out(0), ins.join(" "))
                }
                CellKind::Dff => writeln!(s, "dff {} {} {}", c.name, out(0), name(&c.inputs[0])),
                CellKind::DspMac => {
                    let acc: Vec<String> = (0..DSP_ACC_BITS).map(out).collect();
                    writeln!(
                        s,
                        "dsp {} {} {} {} {}",
                        c.name,
                        acc.join(","),
                        list(&c.inputs[..8]),
                        list(&c.inputs[8..16]),
                        name(&c.inputs[16])
                    )
                }
            };
        }
        s
    }

    pub fn parse(text: &str) -> Result<Netlist, NetlistError> {
        let mut nl = Netlist::new("");
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| NetlistError::Parse { line, msg };
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let tok: Vec<&str> = content.split_whitespace().collect();
            let want = |n: usize| {
                if tok.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{} expects {} fields, found {}", tok[0], n - 1, tok.len() - 1)))
                }
            };
            let pin_arg = |t: Option<&&str>| -> Result<Option<PinConstraint>, NetlistError> {
                let Some(t) = t else { return Ok(None) };
                let spec = t.strip_prefix('@').ok_or_else(|| err(format!("bad pin constraint {t:?}")))?;
                let (bank, idx) = spec.split_once(':').ok_or_else(|| err(format!("bad pin constraint {t:?}")))?;
                let bank = match bank {
                    "west" => Bank::West,
                    "east" => Bank::East,
                    _ => return Err(err(format!("unknown bank {bank:?}"))),
                };
                let index = idx.parse().map_err(|_| err(format!("bad pin index {idx:?}")))?;
                Ok(Some(PinConstraint { bank, index }))
            };
            let add = |nl: &mut Netlist, name: &str, kind, ins, outs, pin| {
                nl.add_cell(name, kind, ins, outs, pin).map_err(|e| match e {
                    NetlistError::Parse { .. } => e,
                    other => err(other.to_string()),
                })
            };
            match tok[0] {
                "netlist" => {
                    want(2)?;
                    nl.name = tok[1].to_string();
                }
                "net" => {
                    want(2)?;
                    nl.net_named(tok[1]);
                }
                "input" | "output" => {
                    if tok.len() != 3 && tok.len() != 4 {
                        return Err(err(format!("{} expects 2 or 3 fields", tok[0])));
                    }
                    let net = nl.net_named(tok[2]);
                    let pin = pin_arg(tok.get(3))?;
                    if tok[0] == "input" {
                        add(&mut nl, tok[1], CellKind::InPort, vec![], vec![net], pin)?;
                    } else {
                        add(&mut nl, tok[1], CellKind::OutPort, vec![net], vec![], pin)?;
                    }
                }
                "const" => {
                    want(4)?;
                    let v = match tok[2] {
                        "0" => false,
                        "1" => true,
                        other => return Err(err(format!("bad constant {other:?}"))),
                    };
                    let out = nl.net_named(tok[3]);
                    add(&mut nl, tok[1], CellKind::Const(v), vec![], vec![out], None)?;
                }
                "lut" => {
                    want(8)?;
                    let hex = tok[2].strip_prefix("0x").ok_or_else(|| err("truth table must be 0x-prefixed".into()))?;
                    let tt = u16::from_str_radix(hex, 16).map_err(|_| err(format!("bad truth table {:?}", tok[2])))?;
                    let out = nl.net_named(tok[3]);
                    let ins = tok[4..8].iter().map(|n| nl.net_named(n)).collect();
                    add(&mut nl, tok[1], CellKind::Lut4 { truth_table: tt }, ins, vec![out], None)?;
                }
                "dff" => {
                    want(4)?;
                    let q = nl.net_named(tok[2]);
                    let d = nl.net_named(tok[3]);
                    add(&mut nl, tok[1], CellKind::Dff, vec![d], vec![q], None)?;
                }
                "dsp" => {
                    want(6)?;
                    let split = |s: &str, n: usize| -> Result<Vec<String>, NetlistError> {
                        let v: Vec<String> = s.split(',').map(str::to_string).collect();
                        if v.len() != n {
                            return Err(err(format!("expected {n} nets, found {}", v.len())));
                        }
                        Ok(v)
                    };
                    let acc = split(tok[2], DSP_ACC_BITS)?;
                    let a = split(tok[3], DSP_OPERAND_BITS)?;
                    let b = split(tok[4], DSP_OPERAND_BITS)?;
                    let outs = acc.iter().map(|n| nl.net_named(n)).collect();
                    let mut ins: Vec<NetId> = a.iter().chain(&b).map(|n| nl.net_named(n)).collect();
                    ins.push(nl.net_named(tok[5]));
                    add(&mut nl, tok[1], CellKind::DspMac, ins, outs, None)?;
                }
                other => return Err(err(format!("unknown statement {other:?}"))),
            }
        }
        Ok(nl)
    }
}

impl FromStr for Netlist {
    type Err = NetlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Netlist::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and4() -> Netlist {
        let mut nl = Netlist::new("and4");
        let ins: Vec<NetId> = (0..4).map(|i| nl.add_input(&format!("i{i}"), None)).collect();
        let y = nl.add_lut("y", 0x8000, &ins);
        nl.add_output("out", y, Some(PinConstraint::east(3)));
        nl
    }

    #[test]
    fn builder_and_text_round_trip() {
        let nl = and4();
        nl.validate().unwrap();
        let text = nl.to_text();
        let back = Netlist::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.lut_count(), 1);
        assert_eq!(back.cell(back.outputs()[0]).pin, Some(PinConstraint::east(3)));
    }

    #[test]
    fn double_driver_and_undriven() {
        let mut nl = Netlist::new("x");
        let a = nl.add_input("a", None);
        let r = nl.add_cell("c", CellKind::Const(true), vec![], vec![a], None);
        assert_eq!(r, Err(NetlistError::MultipleDrivers("a".into())));
        let floating = nl.add_net("floating");
        nl.add_output("o", floating, None);
        assert_eq!(nl.validate(), Err(NetlistError::UndrivenNet("floating".into())));
    }

    #[test]
    fn loop_is_detected() {
        let mut nl = Netlist::new("loop");
        let n = nl.add_net("n");
        nl.add_lut_into("inv", 0x5555, &[n], n);
        assert_eq!(nl.validate(), Err(NetlistError::CombinationalLoop("n".into())));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = Netlist::parse("netlist t\nlut a 0x1 y a b c\n").unwrap_err();
        assert!(matches!(e, NetlistError::Parse { line: 2, .. }));
        let e = Netlist::parse("input a x @north:3\n").unwrap_err();
        assert!(matches!(e, NetlistError::Parse { line: 1, .. }));
        let e = Netlist::parse("frob\n").unwrap_err();
        assert!(matches!(e, NetlistError::Parse { line: 1, .. }));
    }

    #[test]
    fn depth() {
        let mut nl = and4();
        let y = nl.net_by_name("y").unwrap();
        let z = nl.add_lut("z", 0x5555, &[y]);
        nl.add_output("z", z, None);
        assert_eq!(nl.logic_depth(), Ok(2));
    }
}

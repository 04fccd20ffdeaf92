// SPDX-License-Identifier: Apache-2.0

//! Netlist generation for a quantized tree.
//!
//! Each split becomes a constant comparator `x[f] <= c`, evaluated as an
//! unsigned comparison after flipping the sign bit and rippled from the
//! LSB, three feature bits per LUT after the first. Every output bit is the
//! tree itself with that bit of each leaf score at the leaves, mapped as a
//! mux tree over the comparator outputs. The decision bit is one more
//! per-leaf constant, `leaf score >= score threshold`.

use std::collections::HashMap;

use efab_core::cad::{NetId, Netlist};
use efab_ml::{Fixed, QuantNode, QuantTreeModel, N_FEATURES};

use crate::map::{Func, Mapper, Sig};
use crate::TreecError;

pub const DEFAULT_WIDTH: usize = Fixed::BITS as usize;
pub const MAX_INTERNAL_NODES: usize = 31;
/// LUT levels per pipeline stage.
pub const MAX_LUT_LEVELS: usize = 8;
pub const SCORE_BITS: usize = Fixed::BITS as usize;

#[derive(Clone, Debug)]
pub struct CompiledTree {
    pub netlist: Netlist,
    pub lut_count: usize,
    pub ff_count: usize,
    /// Cycles from a feature vector on the inputs to its score on the outputs.
    pub pipeline_depth: usize,
    /// Feature bits per input bus.
    pub width: usize,
    /// Splits that needed comparator logic.
    pub comparators: usize,
    /// LUT levels on the longest path before register insertion.
    pub logic_levels: usize,
}

pub fn input_name(feature: usize, bit: usize) -> String {
    format!("x{feature}[{bit}]")
}

pub fn score_name(bit: usize) -> String {
    format!("score[{bit}]")
}

pub const DECISION: &str = "decision";

impl CompiledTree {
    /// Input port values for one vector, in netlist input order.
    pub fn input_bits(&self, features: &[Fixed; N_FEATURES]) -> Result<Vec<bool>, TreecError> {
        let w = self.width;
        let mut bits = Vec::with_capacity(N_FEATURES * w);
        for (f, x) in features.iter().enumerate() {
            if !fits_width(x.raw(), w) {
                return Err(TreecError::FeatureOutOfRange { feature: f, raw: x.raw(), width: w });
            }
            bits.extend((0..w).map(|b| x.raw() >> b & 1 != 0));
        }
        Ok(bits)
    }

    /// (score, decision) from output port values in netlist output order.
    pub fn decode_outputs(&self, out: &[bool]) -> (Fixed, bool) {
        let raw = out[..SCORE_BITS].iter().enumerate().fold(0u32, |a, (b, &v)| a | (v as u32) << b);
        (Fixed::from_bits(raw), out[SCORE_BITS])
    }
}

pub fn fits_width(raw: i32, width: usize) -> bool {
    let half = 1i64 << (width - 1);
    (-half..half).contains(&(raw as i64))
}

fn check_model(model: &QuantTreeModel) -> Result<Vec<Fixed>, TreecError> {
    let nodes = &model.nodes;
    if nodes.is_empty() {
        return Err(TreecError::InvalidModel("tree has no nodes".into()));
    }
    let internal = model.internal_nodes();
    if internal > MAX_INTERNAL_NODES {
        return Err(TreecError::TooManyNodes(internal));
    }
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut seen[i], true) {
            return Err(TreecError::InvalidModel(format!("node {i} is reached twice")));
        }
        if let QuantNode::Split { feature, left, right, .. } = nodes[i] {
            if feature >= N_FEATURES {
                return Err(TreecError::InvalidModel(format!("feature {feature} out of range")));
            }
            for c in [left, right] {
                if c >= nodes.len() {
                    return Err(TreecError::InvalidModel(format!("node {i} child {c} out of range")));
                }
                stack.push(c);
            }
        }
    }
    let mut scores = vec![Fixed::ZERO; nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        if let QuantNode::Leaf { value } = *n {
            scores[i] = model
                .base_score
                .checked_add(value)
                .ok_or(TreecError::Overflow(model.base_score.to_f64() + value.to_f64()))?;
        }
    }
    Ok(scores)
}

/// `x <= c` over a `width`-bit two's-complement input bus.
fn comparator(m: &mut Mapper, feature: usize, c: i32, width: usize) -> Func {
    if c as i64 >= (1i64 << (width - 1)) - 1 {
        return Func::constant(true);
    }
    if (c as i64) < -(1i64 << (width - 1)) {
        return Func::constant(false);
    }
    let sign = 1u64 << (width - 1);
    let cu = (c as i64 as u64 ^ sign) & ((sign << 1) - 1);
    let mut le = Func::constant(true);
    for b in 0..width {
        let x = Func::sig(Sig::Input((feature * width + b) as u32));
        let flip = b == width - 1;
        let c_bit = cu >> b & 1 != 0;
        le = m.combine(&[x, le], move |v| {
            let xb = v[0] ^ flip;
            if c_bit { !xb || v[1] } else { !xb && v[1] }
        });
    }
    le
}

pub fn compile_tree(model: &QuantTreeModel) -> Result<CompiledTree, TreecError> {
    compile_with(model, DEFAULT_WIDTH)
}

/// Compiles for `width`-bit feature buses. Thresholds outside the bus
/// range fold to constant comparisons.
pub fn compile_with(model: &QuantTreeModel, width: usize) -> Result<CompiledTree, TreecError> {
    if !(2..=DEFAULT_WIDTH).contains(&width) {
        return Err(TreecError::Width(width));
    }
    let scores = check_model(model)?;
    let nodes = &model.nodes;
    let mut m = Mapper::default();

    let mut decisions: Vec<Option<Func>> = vec![None; nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        if let QuantNode::Split { feature, threshold, .. } = *n {
            let f = comparator(&mut m, feature, threshold.raw(), width);
            decisions[i] = Some(match f.as_constant() {
                Some(_) => f,
                None => Func::sig(m.materialize(&f)),
            });
        }
    }

    let leaf_bit = |i: usize, bit: usize| -> bool {
        if bit < SCORE_BITS {
            scores[i].bits() >> bit & 1 != 0
        } else {
            scores[i] >= model.score_threshold
        }
    };
    fn select(m: &mut Mapper, nodes: &[QuantNode], d: &[Option<Func>], i: usize, leaf: &dyn Fn(usize) -> bool) -> Func {
        match nodes[i] {
            QuantNode::Leaf { .. } => Func::constant(leaf(i)),
            QuantNode::Split { left, right, .. } => {
                let l = select(m, nodes, d, left, leaf);
                let r = select(m, nodes, d, right, leaf);
                m.mux(d[i].as_ref().unwrap(), &l, &r)
            }
        }
    }
    let outputs: Vec<Func> = (0..=SCORE_BITS)
        .map(|bit| {
            let f = select(&mut m, nodes, &decisions, 0, &|i| leaf_bit(i, bit));
            match f.as_constant() {
                Some(_) => f,
                None => Func::sig(m.materialize(&f)),
            }
        })
        .collect();

    // keep only LUTs an output depends on
    let mut live = vec![false; m.luts.len()];
    let mut stack: Vec<u32> = outputs.iter().filter_map(|f| f.as_sig()).filter_map(lut_index).collect();
    while let Some(j) = stack.pop() {
        if !std::mem::replace(&mut live[j as usize], true) {
            stack.extend(m.luts[j as usize].inputs.iter().copied().filter_map(lut_index));
        }
    }
    let comparators = decisions
        .iter()
        .flatten()
        .filter_map(|f| f.as_sig().and_then(lut_index))
        .filter(|&j| live[j as usize])
        .count();

    let mut level = vec![0usize; m.luts.len()];
    for j in 0..m.luts.len() {
        if live[j] {
            level[j] = 1 + m.luts[j].inputs.iter().filter_map(|&s| lut_index(s)).map(|k| level[k as usize]).max().unwrap_or(0);
        }
    }
    let logic_levels = level.iter().copied().max().unwrap_or(0);
    let stage_of = |s: Sig| match s {
        Sig::Input(_) => 0,
        Sig::Lut(j) => (level[j as usize] - 1) / MAX_LUT_LEVELS,
    };
    let last_stage = if logic_levels == 0 { 0 } else { (logic_levels - 1) / MAX_LUT_LEVELS };

    let mut nl = Netlist::new("tree");
    let mut inputs = Vec::with_capacity(N_FEATURES * width);
    for f in 0..N_FEATURES {
        for b in 0..width {
            inputs.push(nl.add_input(&input_name(f, b), None));
        }
    }
    let mut lut_nets: Vec<Option<NetId>> = vec![None; m.luts.len()];
    let mut delayed: HashMap<(NetId, usize), NetId> = HashMap::new();
    fn delay(nl: &mut Netlist, memo: &mut HashMap<(NetId, usize), NetId>, net: NetId, k: usize) -> NetId {
        if k == 0 {
            return net;
        }
        if let Some(&n) = memo.get(&(net, k)) {
            return n;
        }
        let prev = delay(nl, memo, net, k - 1);
        let name = format!("{}.d{k}", nl.net(net).name);
        let q = nl.add_dff(&name, prev);
        memo.insert((net, k), q);
        q
    }
    let net_of = |s: Sig, lut_nets: &[Option<NetId>]| match s {
        Sig::Input(i) => inputs[i as usize],
        Sig::Lut(j) => lut_nets[j as usize].expect("LUTs are emitted in dependency order"),
    };
    for j in 0..m.luts.len() {
        if !live[j] {
            continue;
        }
        let stage = stage_of(Sig::Lut(j as u32));
        let ins: Vec<NetId> = m.luts[j]
            .inputs
            .iter()
            .map(|&s| {
                let n = net_of(s, &lut_nets);
                delay(&mut nl, &mut delayed, n, stage - stage_of(s))
            })
            .collect();
        lut_nets[j] = Some(nl.add_lut(&format!("lut{j}"), m.luts[j].tt, &ins));
    }
    let mut consts: [Option<NetId>; 2] = [None, None];
    for (bit, f) in outputs.iter().enumerate() {
        let net = match (f.as_constant(), f.as_sig()) {
            (Some(v), _) => *consts[v as usize].get_or_insert_with(|| nl.constant_net(v)),
            (None, Some(s)) => {
                let n = net_of(s, &lut_nets);
                delay(&mut nl, &mut delayed, n, last_stage - stage_of(s))
            }
            (None, None) => unreachable!("outputs are materialized"),
        };
        let name = if bit < SCORE_BITS { score_name(bit) } else { DECISION.to_string() };
        nl.add_output(&name, net, None);
    }
    nl.validate()?;
    Ok(CompiledTree {
        lut_count: nl.lut_count(),
        ff_count: nl.dff_count(),
        pipeline_depth: last_stage,
        width,
        comparators,
        logic_levels,
        netlist: nl,
    })
}

fn lut_index(s: Sig) -> Option<u32> {
    match s {
        Sig::Lut(j) => Some(j),
        Sig::Input(_) => None,
    }
}

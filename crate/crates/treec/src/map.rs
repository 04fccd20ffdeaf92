// SPDX-License-Identifier: Apache-2.0

//! Greedy LUT4 mapping of small Boolean functions.
//!
//! A [`Func`] is a function of at most four signals. Combining functions
//! inlines them while the joint support fits one LUT and otherwise
//! materializes the widest argument as a LUT of its own. Materialized LUTs
//! are hash-consed on (support, truth table).

use std::collections::HashMap;

use efab_core::arch::LUT_INPUTS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sig {
    Input(u32),
    Lut(u32),
}

/// `tt` bit `i` is the output when input `k` carries bit `k` of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Func {
    pub inputs: Vec<Sig>,
    pub tt: u16,
}

impl Func {
    pub fn constant(v: bool) -> Func {
        Func { inputs: Vec::new(), tt: v as u16 }
    }

    pub fn sig(s: Sig) -> Func {
        Func { inputs: vec![s], tt: 0b10 }
    }

    pub fn as_constant(&self) -> Option<bool> {
        self.inputs.is_empty().then_some(self.tt & 1 != 0)
    }

    /// The signal itself when the function is the identity.
    pub fn as_sig(&self) -> Option<Sig> {
        (self.inputs.len() == 1 && self.tt & 0b11 == 0b10).then(|| self.inputs[0])
    }

    pub fn eval(&self, values: impl Fn(Sig) -> bool) -> bool {
        let idx = self.inputs.iter().enumerate().fold(0, |a, (k, &s)| a | (values(s) as usize) << k);
        self.tt >> idx & 1 != 0
    }

    /// Drops inputs the truth table ignores.
    fn reduce(mut self) -> Func {
        let mut k = 0;
        while k < self.inputs.len() {
            let n = self.inputs.len();
            let depends = (0..1usize << n).any(|i| i >> k & 1 == 0 && (self.tt >> i & 1) != (self.tt >> (i | 1 << k) & 1));
            if depends {
                k += 1;
                continue;
            }
            let mut tt = 0u16;
            for i in 0..1usize << (n - 1) {
                let lo = i & ((1 << k) - 1);
                let hi = (i >> k) << (k + 1);
                tt |= (self.tt >> (hi | lo) & 1) << i;
            }
            self.inputs.remove(k);
            self.tt = tt;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LutSpec {
    pub inputs: Vec<Sig>,
    pub tt: u16,
}

#[derive(Debug, Default)]
pub struct Mapper {
    pub luts: Vec<LutSpec>,
    memo: HashMap<(Vec<Sig>, u16), u32>,
}

impl Mapper {
    /// A signal carrying `f`; emits a LUT unless `f` is already a signal.
    /// Constants have no signal and must be handled by the caller.
    pub fn materialize(&mut self, f: &Func) -> Sig {
        if let Some(s) = f.as_sig() {
            return s;
        }
        assert!(!f.inputs.is_empty(), "constants are not materialized");
        let key = (f.inputs.clone(), f.tt);
        if let Some(&i) = self.memo.get(&key) {
            return Sig::Lut(i);
        }
        let i = self.luts.len() as u32;
        self.luts.push(LutSpec { inputs: f.inputs.clone(), tt: f.tt });
        self.memo.insert(key, i);
        Sig::Lut(i)
    }

    /// `op` applied to the values of `args`.
    pub fn combine(&mut self, args: &[Func], op: impl Fn(&[bool]) -> bool) -> Func {
        let mut args = args.to_vec();
        loop {
            let mut support: Vec<Sig> = args.iter().flat_map(|a| a.inputs.iter().copied()).collect();
            support.sort();
            support.dedup();
            if support.len() <= LUT_INPUTS {
                let mut tt = 0u16;
                let mut vals = vec![false; args.len()];
                for i in 0..1usize << support.len() {
                    let value = |s: Sig| i >> support.binary_search(&s).unwrap() & 1 != 0;
                    for (v, a) in vals.iter_mut().zip(&args) {
                        *v = a.eval(value);
                    }
                    tt |= (op(&vals) as u16) << i;
                }
                return Func { inputs: support, tt }.reduce();
            }
            let widest = (0..args.len()).max_by_key(|&k| args[k].inputs.len()).unwrap();
            assert!(args[widest].inputs.len() > 1, "too many single-signal arguments");
            let s = self.materialize(&args[widest]);
            args[widest] = Func::sig(s);
        }
    }

    pub fn mux(&mut self, sel: &Func, if_true: &Func, if_false: &Func) -> Func {
        self.combine(&[sel.clone(), if_true.clone(), if_false.clone()], |v| if v[0] { v[1] } else { v[2] })
    }
}

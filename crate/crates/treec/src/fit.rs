// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use efab_core::cad::{pack, Netlist, ResourceClass};
use efab_core::{census, FabricLayout, ResourceCensus};

use crate::compile::CompiledTree;

/// Demand of a netlist against a fabric's census. A flip-flop shares a
/// logic cell with the LUT driving it when that LUT feeds nothing else;
/// otherwise it takes a cell of its own.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub luts: usize,
    pub flip_flops: usize,
    pub logic_cells: usize,
    pub dsp_slices: usize,
    pub input_pins: usize,
    pub output_pins: usize,
    pub available: ResourceCensus,
    pub fits: bool,
    /// LUTs over logic cells.
    pub lut_utilization: f64,
    /// Occupied logic cells over logic cells.
    pub cell_utilization: f64,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        if n == 0 { 0.0 } else { f64::INFINITY }
    } else {
        n as f64 / d as f64
    }
}

pub fn fit_netlist(netlist: &Netlist, layout: &FabricLayout) -> FitReport {
    let available = census(layout);
    let units = pack(netlist);
    let count = |c: ResourceClass| units.iter().filter(|u| u.class() == c).count();
    let logic_cells = count(ResourceClass::LogicCell);
    let r = FitReport {
        luts: netlist.lut_count(),
        flip_flops: netlist.dff_count(),
        logic_cells,
        dsp_slices: count(ResourceClass::Dsp),
        input_pins: count(ResourceClass::InputPin),
        output_pins: count(ResourceClass::OutputPin),
        available,
        fits: false,
        lut_utilization: ratio(netlist.lut_count(), available.logic_cells),
        cell_utilization: ratio(logic_cells, available.logic_cells),
    };
    FitReport {
        fits: r.logic_cells <= available.logic_cells
            && r.luts <= available.logic_cells
            && r.flip_flops <= available.flip_flops
            && r.dsp_slices <= available.dsp_slices
            && r.input_pins <= available.io_input_bits
            && r.output_pins <= available.io_output_bits,
        ..r
    }
}

pub fn estimate_resources(compiled: &CompiledTree, layout: &FabricLayout) -> FitReport {
    fit_netlist(&compiled.netlist, layout)
}

impl FitReport {
    pub fn to_csv(&self) -> String {
        let a = &self.available;
        let mut s = String::from("resource,used,available\n");
        for (name, used, avail) in [
            ("lut4", self.luts, a.logic_cells),
            ("flip_flop", self.flip_flops, a.flip_flops),
            ("logic_cell", self.logic_cells, a.logic_cells),
            ("dsp", self.dsp_slices, a.dsp_slices),
            ("input_pin", self.input_pins, a.io_input_bits),
            ("output_pin", self.output_pins, a.io_output_bits),
        ] {
            s.push_str(&format!("{name},{used},{avail}\n"));
        }
        s
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.available;
        writeln!(f, "{:<12} {:>6} {:>10}", "resource", "used", "available")?;
        for (name, used, avail) in [
            ("LUT4", self.luts, a.logic_cells),
            ("flip-flop", self.flip_flops, a.flip_flops),
            ("logic cell", self.logic_cells, a.logic_cells),
            ("DSP", self.dsp_slices, a.dsp_slices),
            ("input pin", self.input_pins, a.io_input_bits),
            ("output pin", self.output_pins, a.io_output_bits),
        ] {
            writeln!(f, "{name:<12} {used:>6} {avail:>10}")?;
        }
        writeln!(f, "LUT utilization {:.1}%", 100.0 * self.lut_utilization)?;
        write!(f, "{}", if self.fits { "fits" } else { "does not fit" })
    }
}

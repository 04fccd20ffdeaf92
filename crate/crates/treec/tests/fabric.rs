// SPDX-License-Identifier: Apache-2.0

use efab_core::cad::run_flow;
use efab_core::{sim, FabricLayout};
use efab_ml::quantize;
use efab_treec::*;

#[test]
fn reference_tree_runs_on_the_fabric() {
    let layout = FabricLayout::cmos28();
    let (tree, _) = reference_model(42).unwrap();
    let q = quantize(&tree, 0.5).unwrap();
    let c = compile_tree(&q).unwrap();
    let flow = run_flow(&c.netlist, &layout, 1).unwrap();
    let mut fabric = sim::load(&layout, &flow.image).unwrap();
    let r = equivalence_check(&c, &q, &stimulus(&q, 28, 5000, 3), Some((&mut fabric, &flow.ports))).unwrap();
    assert!(r.fabric_checked);
    assert!(r.passed(), "{r}");
}

#[test]
fn narrow_variant_is_exhaustive_on_the_fabric() {
    let layout = FabricLayout::cmos28();
    let (tree, _) = reference_model(7).unwrap();
    let narrow = narrow_variant(&quantize(&tree, 0.4922).unwrap(), 4, 4);
    let c = compile_with(&narrow, 4).unwrap();
    let flow = run_flow(&c.netlist, &layout, 2).unwrap();
    let mut fabric = sim::load(&layout, &flow.image).unwrap();
    let every = exhaustive_vectors(4, &used_features(&narrow));
    let r = equivalence_check(&c, &narrow, &every, Some((&mut fabric, &flow.ports))).unwrap();
    assert!(r.passed(), "{r}");
    assert_eq!(r.vectors, every.len());
}

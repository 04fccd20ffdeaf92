// SPDX-License-Identifier: Apache-2.0

//! Negotiated-congestion routing (PathFinder) over the single-length wire grid.
//!
//! Each net grows a routing tree from its source tile, one sink tile at a
//! time, by A* search on wires with cost `(1 + history) * (1 + pres * occupancy)`.
//! Pins within a sink tile share the wire that reaches it; sinks in the
//! source tile select the local source directly. After the first pass only
//! nets on over-used wires are ripped up, and the present-congestion factor
//! grows each iteration.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use super::netlist::{CellKind, NetId, Netlist};
use super::place::{Placement, Unit};
use crate::arch::{dsp_input_location, dsp_output_location, PinSource, RoutingGrid, WireId, WireSource, LUT_INPUTS};
use crate::fabric::{FabricLayout, TileCoord};

pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("unroutable after {iterations} iterations; congested nets: {}", nets.join(", "))]
    Unroutable { nets: Vec<String>, iterations: usize },
}

/// Physical pins of a net: the driving local source and the sink pins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetPins {
    pub net: NetId,
    pub source: (TileCoord, usize),
    pub sinks: Vec<(TileCoord, usize)>,
}

/// Where each placed cell pin lands on the fabric, for every net that needs wires or local selection.
pub fn net_pins(netlist: &Netlist, placement: &Placement) -> Vec<NetPins> {
    let mut out = Vec::new();
    for id in netlist.net_ids() {
        if netlist.constant(id).is_some() {
            continue;
        }
        let net = netlist.net(id);
        let Some((drv, port)) = net.driver else { continue };
        let Some(source) = source_pin(netlist, placement, drv, port) else { continue };
        let sinks: Vec<(TileCoord, usize)> =
            net.sinks.iter().filter_map(|&(c, pin)| sink_pin(netlist, placement, c, pin)).collect();
        if sinks.is_empty() {
            continue;
        }
        out.push(NetPins { net: id, source, sinks });
    }
    out
}

fn source_pin(
    netlist: &Netlist,
    placement: &Placement,
    cell: super::CellId,
    port: usize,
) -> Option<(TileCoord, usize)> {
    let u = placement.unit_of(cell)?;
    let site = placement.sites[u];
    match placement.units[u] {
        Unit::Logic { ff, .. } => {
            // a packed LUT drives only its flip-flop, inside the slot
            if netlist.cell(cell).kind != CellKind::Dff && ff.is_some() {
                return None;
            }
            Some((site.tile, site.index))
        }
        Unit::Input(_) => Some((site.tile, site.index)),
        Unit::Dsp(_) => {
            let (dr, k) = dsp_output_location(port);
            Some((TileCoord::new(site.tile.row + dr, site.tile.col), k))
        }
        Unit::Output(_) => None,
    }
}

fn sink_pin(netlist: &Netlist, placement: &Placement, cell: super::CellId, pin: usize) -> Option<(TileCoord, usize)> {
    let u = placement.unit_of(cell)?;
    let site = placement.sites[u];
    match placement.units[u] {
        Unit::Logic { lut, .. } => {
            if netlist.cell(cell).kind == CellKind::Dff {
                // D of a packed FF comes from its own LUT
                if lut.is_some() {
                    return None;
                }
                return Some((site.tile, site.index * LUT_INPUTS));
            }
            Some((site.tile, site.index * LUT_INPUTS + pin))
        }
        Unit::Output(_) => Some((site.tile, site.index)),
        Unit::Dsp(_) => {
            let (dr, k) = dsp_input_location(pin);
            Some((TileCoord::new(site.tile.row + dr, site.tile.col), k))
        }
        Unit::Input(_) => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutedNet {
    pub net: NetId,
    pub source: (TileCoord, usize),
    /// Wires used, each with the mux selection that drives it.
    pub wires: Vec<(WireId, WireSource)>,
    /// One wire path per reached sink tile, in the order they were added to the tree.
    pub paths: Vec<Vec<WireId>>,
    /// Pin mux selection for every sink pin.
    pub sinks: Vec<(TileCoord, usize, PinSource)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingResult {
    pub nets: Vec<RoutedNet>,
    /// Largest number of nets sharing one wire.
    pub congestion: usize,
    pub iterations: usize,
}

impl RoutingResult {
    pub fn wire_count(&self) -> usize {
        self.nets.iter().map(|n| n.wires.len()).sum()
    }

    /// Walks every sink back to its net's source through the recorded drivers.
    pub fn verify(&self, layout: &FabricLayout) -> Result<(), String> {
        let grid = RoutingGrid::new(layout);
        let mut owner: BTreeMap<WireId, NetId> = BTreeMap::new();
        for rn in &self.nets {
            let drivers: BTreeMap<WireId, WireSource> = rn.wires.iter().copied().collect();
            for &(w, _) in &rn.wires {
                if let Some(other) = owner.insert(w, rn.net) {
                    return Err(format!("wire {w:?} shared by nets {other:?} and {:?}", rn.net));
                }
            }
            for &(tile, sink, src) in &rn.sinks {
                let mut wire = match src {
                    PinSource::Local(k) if (tile, k) == rn.source => continue,
                    PinSource::Incoming { side, track } => grid
                        .incoming(tile, side, track)
                        .ok_or_else(|| format!("sink ({tile:?}, {sink}) reads a missing wire"))?,
                    other => return Err(format!("sink ({tile:?}, {sink}) selects {other:?}")),
                };
                for _ in 0..grid.wire_slots() {
                    let w = grid.wire(wire);
                    match drivers.get(&wire) {
                        Some(WireSource::Local(k)) if (w.tile, *k) == rn.source => break,
                        Some(WireSource::Incoming(from)) => {
                            wire = grid
                                .incoming(w.tile, *from, w.track)
                                .ok_or_else(|| format!("wire {wire:?} fed from a missing wire"))?;
                        }
                        other => return Err(format!("wire {wire:?} of net {:?} has driver {other:?}", rn.net)),
                    }
                }
            }
        }
        Ok(())
    }

    /// Text table of per-net routing.
    pub fn report(&self, netlist: &Netlist) -> String {
        let mut s = format!("{:<32} {:>6} {:>6}\n", "net", "sinks", "wires");
        for rn in &self.nets {
            s += &format!("{:<32} {:>6} {:>6}\n", netlist.net(rn.net).name, rn.sinks.len(), rn.wires.len());
        }
        s += &format!(
            "{} nets, {} wires, congestion {}, {} iterations\n",
            self.nets.len(),
            self.wire_count(),
            self.congestion,
            self.iterations
        );
        s
    }
}

struct Router<'a> {
    grid: &'a RoutingGrid,
    occ: Vec<u16>,
    hist: Vec<f32>,
    pres: f32,
    best: Vec<f32>,
    pred: Vec<u32>,
    seen: Vec<u32>,
    epoch: u32,
    in_tree: Vec<u32>,
    tree_epoch: u32,
}

const NO_PRED: u32 = u32::MAX;

#[derive(Clone, Copy, PartialEq)]
struct Key(f32);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Router<'_> {
    fn cost(&self, w: WireId) -> f32 {
        let i = w.0 as usize;
        (1.0 + self.hist[i]) * (1.0 + self.pres * self.occ[i] as f32)
    }

    /// Routes one net, returning its wires with drivers and the arriving wire per sink tile.
    fn route_net(&mut self, pins: &NetPins) -> Option<(Vec<(WireId, WireSource)>, Vec<Vec<WireId>>, BTreeMap<TileCoord, WireId>)> {
        let (src_tile, src_k) = pins.source;
        let mut targets: Vec<TileCoord> = pins.sinks.iter().map(|s| s.0).filter(|&t| t != src_tile).collect();
        targets.sort_by_key(|t| (t.manhattan(src_tile), *t));
        targets.dedup();
        self.tree_epoch += 1;
        let mut tree: Vec<(WireId, WireSource)> = Vec::new();
        let mut paths = Vec::new();
        let mut arrive = BTreeMap::new();
        for target in targets {
            if arrive.contains_key(&target) {
                continue;
            }
            if let Some(&(w, _)) = tree.iter().find(|(w, _)| self.grid.dest(*w) == target) {
                arrive.insert(target, w);
                continue;
            }
            self.epoch += 1;
            let mut heap = BinaryHeap::new();
            let h = |g: &RoutingGrid, w: WireId| g.dest(w).manhattan(target) as f32;
            let push = |r: &mut Self, heap: &mut BinaryHeap<(Reverse<Key>, u32)>, w: WireId, g: f32, pred: u32| {
                let i = w.0 as usize;
                if r.in_tree[i] == r.tree_epoch {
                    return;
                }
                if r.seen[i] == r.epoch && r.best[i] <= g {
                    return;
                }
                r.seen[i] = r.epoch;
                r.best[i] = g;
                r.pred[i] = pred;
                heap.push((Reverse(Key(g + h(r.grid, w))), w.0));
            };
            for w in self.grid.outgoing(src_tile).collect::<Vec<_>>() {
                let c = self.cost(w);
                push(self, &mut heap, w, c, NO_PRED);
            }
            for &(tw, _) in &tree {
                for s in self.grid.successors(tw).collect::<Vec<_>>() {
                    let c = self.cost(s);
                    push(self, &mut heap, s, c, tw.0);
                }
            }
            let mut found = None;
            while let Some((Reverse(Key(f)), w)) = heap.pop() {
                let id = WireId(w);
                let g = self.best[w as usize];
                if f > g + h(self.grid, id) + 1e-3 {
                    continue;
                }
                if self.grid.dest(id) == target {
                    found = Some(id);
                    break;
                }
                for s in self.grid.successors(id).collect::<Vec<_>>() {
                    let c = self.cost(s);
                    push(self, &mut heap, s, g + c, w);
                }
            }
            let end = found?;
            let mut path = vec![end];
            let mut w = end;
            loop {
                let p = self.pred[w.0 as usize];
                if p == NO_PRED || self.in_tree[p as usize] == self.tree_epoch {
                    let drv = if p == NO_PRED {
                        WireSource::Local(src_k)
                    } else {
                        WireSource::Incoming(self.grid.wire(WireId(p)).side.opposite())
                    };
                    tree.push((w, drv));
                    self.in_tree[w.0 as usize] = self.tree_epoch;
                    break;
                }
                let pw = WireId(p);
                tree.push((w, WireSource::Incoming(self.grid.wire(pw).side.opposite())));
                self.in_tree[w.0 as usize] = self.tree_epoch;
                path.push(pw);
                w = pw;
            }
            path.reverse();
            paths.push(path);
            arrive.insert(target, end);
        }
        Some((tree, paths, arrive))
    }
}

pub fn route(netlist: &Netlist, placement: &Placement, layout: &FabricLayout) -> Result<RoutingResult, RouteError> {
    let pins = net_pins(netlist, placement);
    route_pins(netlist, &pins, layout)
}

/// Routes explicit pin sets; exposed for tests that build congestion by hand.
pub fn route_pins(netlist: &Netlist, pins: &[NetPins], layout: &FabricLayout) -> Result<RoutingResult, RouteError> {
    let grid = RoutingGrid::new(layout);
    let n = grid.wire_slots();
    let mut r = Router {
        grid: &grid,
        occ: vec![0; n],
        hist: vec![0.0; n],
        pres: 0.5,
        best: vec![0.0; n],
        pred: vec![NO_PRED; n],
        seen: vec![0; n],
        epoch: 0,
        in_tree: vec![0; n],
        tree_epoch: 0,
    };
    // widest nets first
    let mut order: Vec<usize> = (0..pins.len()).collect();
    order.sort_by_key(|&i| (Reverse(pins[i].sinks.len()), i));

    type Routed = (Vec<(WireId, WireSource)>, Vec<Vec<WireId>>, BTreeMap<TileCoord, WireId>);
    let mut routes: Vec<Option<Routed>> = vec![None; pins.len()];
    let mut iterations = 0;
    let mut failed: Vec<usize> = Vec::new();
    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        failed.clear();
        for &i in &order {
            let congested = match &routes[i] {
                None => true,
                Some((wires, _, _)) => wires.iter().any(|(w, _)| r.occ[w.0 as usize] > 1),
            };
            if iter > 1 && !congested {
                continue;
            }
            if let Some((wires, _, _)) = routes[i].take() {
                for (w, _) in wires {
                    r.occ[w.0 as usize] -= 1;
                }
            }
            match r.route_net(&pins[i]) {
                Some(route) => {
                    for (w, _) in &route.0 {
                        r.occ[w.0 as usize] += 1;
                    }
                    routes[i] = Some(route);
                }
                None => failed.push(i),
            }
        }
        let over: Vec<usize> = (0..n).filter(|&w| r.occ[w] > 1).collect();
        if over.is_empty() && failed.is_empty() {
            break;
        }
        for w in over {
            r.hist[w] += (r.occ[w] - 1) as f32;
        }
        r.pres *= 1.6;
        if iter == MAX_ITERATIONS {
            let mut bad: Vec<usize> = failed.clone();
            for (i, route) in routes.iter().enumerate() {
                if let Some((wires, _, _)) = route {
                    if wires.iter().any(|(w, _)| r.occ[w.0 as usize] > 1) {
                        bad.push(i);
                    }
                }
            }
            bad.sort_unstable();
            bad.dedup();
            let nets = bad.iter().map(|&i| netlist.net(pins[i].net).name.clone()).collect();
            return Err(RouteError::Unroutable { nets, iterations });
        }
    }

    let mut nets = Vec::new();
    let mut congestion = 0;
    for (p, route) in pins.iter().zip(routes) {
        let (wires, paths, arrive) = route.expect("all nets routed");
        let sinks = p
            .sinks
            .iter()
            .map(|&(tile, sink)| {
                let src = if tile == p.source.0 {
                    PinSource::Local(p.source.1)
                } else {
                    let w = grid.wire(arrive[&tile]);
                    PinSource::Incoming { side: w.side.opposite(), track: w.track }
                };
                (tile, sink, src)
            })
            .collect();
        for (w, _) in &wires {
            congestion = congestion.max(r.occ[w.0 as usize] as usize);
        }
        nets.push(RoutedNet { net: p.net, source: p.source, wires, paths, sinks });
    }
    Ok(RoutingResult { nets, congestion, iterations })
}

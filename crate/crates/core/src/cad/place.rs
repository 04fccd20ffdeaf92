// SPDX-License-Identifier: Apache-2.0

//! Packing and simulated-annealing placement.
//!
//! A LUT whose only sink is a flip-flop shares that flip-flop's slot; any
//! other flip-flop gets a pass-through LUT. Const cells are not placed, their
//! sinks select the constant in the pin mux.
//!
//! Annealing minimises total half-perimeter wirelength. The start
//! temperature makes an average uphill move pass with probability 1/2;
//! temperature falls by x0.95 after `moves_per_unit x units` moves, and the
//! move window shrinks or widens with the acceptance rate.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::netlist::{CellId, CellKind, Netlist, NetlistError};
use crate::fabric::{FabricLayout, TileCoord, TileKind};
use crate::sim::{Bank, IoMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResourceClass {
    LogicCell,
    Dsp,
    InputPin,
    OutputPin,
}

impl ResourceClass {
    pub const ALL: [ResourceClass; 4] =
        [ResourceClass::LogicCell, ResourceClass::Dsp, ResourceClass::InputPin, ResourceClass::OutputPin];
}

impl fmt::Display for ResourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceClass::LogicCell => "logic cells",
            ResourceClass::Dsp => "DSP slices",
            ResourceClass::InputPin => "input pins",
            ResourceClass::OutputPin => "output pins",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlaceError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("design needs {needed} {class}, layout has {available}")]
    CapacityExceeded { class: ResourceClass, needed: usize, available: usize },
    #[error("port {port:?} is constrained to a pin that is taken or does not exist")]
    PinConflict { port: String },
}

/// A placeable group of cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Logic { lut: Option<CellId>, ff: Option<CellId> },
    Dsp(CellId),
    Input(CellId),
    Output(CellId),
}

impl Unit {
    pub fn class(&self) -> ResourceClass {
        match self {
            Unit::Logic { .. } => ResourceClass::LogicCell,
            Unit::Dsp(_) => ResourceClass::Dsp,
            Unit::Input(_) => ResourceClass::InputPin,
            Unit::Output(_) => ResourceClass::OutputPin,
        }
    }

    fn cells(&self) -> impl Iterator<Item = CellId> {
        let v: [Option<CellId>; 2] = match *self {
            Unit::Logic { lut, ff } => [lut, ff],
            Unit::Dsp(c) | Unit::Input(c) | Unit::Output(c) => [Some(c), None],
        };
        v.into_iter().flatten()
    }
}

/// Location of a unit: a LUT4AB slot, a DSP_top tile (index 0), or an IO pin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub tile: TileCoord,
    pub index: usize,
}

/// Groups cells into placeable units.
pub fn pack(netlist: &Netlist) -> Vec<Unit> {
    let mut lut_taken = vec![false; netlist.cells().len()];
    let mut units = Vec::new();
    let mut ff_unit = BTreeMap::new();
    for id in netlist.cell_ids() {
        let cell = netlist.cell(id);
        if cell.kind != CellKind::Dff {
            continue;
        }
        let d = cell.inputs[0].expect("validated");
        let net = netlist.net(d);
        let lut = match net.driver {
            Some((drv, _))
                if matches!(netlist.cell(drv).kind, CellKind::Lut4 { .. })
                    && net.sinks.len() == 1
                    && !lut_taken[drv.0 as usize] =>
            {
                lut_taken[drv.0 as usize] = true;
                Some(drv)
            }
            _ => None,
        };
        ff_unit.insert(id, lut);
    }
    for id in netlist.cell_ids() {
        let cell = netlist.cell(id);
        let unit = match cell.kind {
            CellKind::Lut4 { .. } if !lut_taken[id.0 as usize] => Unit::Logic { lut: Some(id), ff: None },
            CellKind::Dff => Unit::Logic { lut: ff_unit[&id], ff: Some(id) },
            CellKind::DspMac => Unit::Dsp(id),
            CellKind::InPort => Unit::Input(id),
            CellKind::OutPort => Unit::Output(id),
            _ => continue,
        };
        units.push(unit);
    }
    units
}

/// Every site of each class on `layout`, in a fixed order.
pub fn sites(layout: &FabricLayout, class: ResourceClass) -> Vec<Site> {
    match class {
        ResourceClass::LogicCell => layout
            .tiles_of(TileKind::Lut4ab)
            .flat_map(|t| (0..crate::arch::LUT_SLOTS).map(move |s| Site { tile: t, index: s }))
            .collect(),
        ResourceClass::Dsp => layout.tiles_of(TileKind::DspTop).map(|t| Site { tile: t, index: 0 }).collect(),
        ResourceClass::InputPin | ResourceClass::OutputPin => {
            let map = IoMap::new(layout);
            [Bank::West, Bank::East]
                .into_iter()
                .flat_map(|b| (0..map.width(b)).map(move |i| (b, i)))
                .map(|(b, i)| {
                    let (tile, index) = map.location(b, i).unwrap();
                    Site { tile, index }
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaceOptions {
    pub seed: u64,
    pub moves_per_unit: usize,
    pub cooling: f64,
    pub max_temperatures: usize,
}

impl PlaceOptions {
    pub fn new(seed: u64) -> Self {
        PlaceOptions { seed, moves_per_unit: 100, cooling: 0.95, max_temperatures: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub units: Vec<Unit>,
    pub sites: Vec<Site>,
    /// Total half-perimeter wirelength.
    pub cost: usize,
    pub temperatures: usize,
    cell_unit: Vec<Option<u32>>,
}

impl Placement {
    pub fn unit_of(&self, cell: CellId) -> Option<usize> {
        self.cell_unit[cell.0 as usize].map(|u| u as usize)
    }

    pub fn site_of(&self, cell: CellId) -> Option<Site> {
        self.unit_of(cell).map(|u| self.sites[u])
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Legality check: every non-constant cell placed, one unit per site,
    /// kinds on matching tiles and constrained ports on their pins.
    pub fn check(&self, netlist: &Netlist, layout: &FabricLayout) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for (u, (unit, site)) in self.units.iter().zip(&self.sites).enumerate() {
            if let Some(prev) = seen.insert((unit.class(), *site), u) {
                return Err(format!("units {prev} and {u} share site {site:?}"));
            }
            let kind = layout.tile(site.tile);
            let ok = match unit.class() {
                ResourceClass::LogicCell => kind == TileKind::Lut4ab,
                ResourceClass::Dsp => kind == TileKind::DspTop,
                _ => matches!(kind, TileKind::WestIo | TileKind::EastIo),
            };
            if !ok {
                return Err(format!("unit {u} of class {} on a {kind} tile", unit.class()));
            }
            for c in unit.cells() {
                if let Some(pin) = netlist.cell(c).pin {
                    let map = IoMap::new(layout);
                    if map.location(pin.bank, pin.index) != Some((site.tile, site.index)) {
                        return Err(format!("port {} is off its constrained pin", netlist.cell(c).name));
                    }
                }
            }
        }
        for id in netlist.cell_ids() {
            let placed = self.unit_of(id).is_some();
            let virtual_cell = matches!(netlist.cell(id).kind, CellKind::Const(_));
            if placed == virtual_cell {
                return Err(format!("cell {} placement state is wrong", netlist.cell(id).name));
            }
        }
        Ok(())
    }

    /// Text table of unit locations.
    pub fn report(&self, netlist: &Netlist) -> String {
        let mut s = format!("{:<32} {:<10} {:>4} {:>4} {:>5}\n", "cell", "class", "row", "col", "index");
        for (unit, site) in self.units.iter().zip(&self.sites) {
            for c in unit.cells() {
                s += &format!(
                    "{:<32} {:<10} {:>4} {:>4} {:>5}\n",
                    netlist.cell(c).name,
                    match unit.class() {
                        ResourceClass::LogicCell => "logic",
                        ResourceClass::Dsp => "dsp",
                        ResourceClass::InputPin => "in",
                        ResourceClass::OutputPin => "out",
                    },
                    site.tile.row,
                    site.tile.col,
                    site.index
                );
            }
        }
        s += &format!("total HPWL {}\n", self.cost);
        s
    }
}

pub fn place(netlist: &Netlist, layout: &FabricLayout, seed: u64) -> Result<Placement, PlaceError> {
    place_with(netlist, layout, &PlaceOptions::new(seed))
}

struct Annealer {
    /// Global site list; `class_sites[c]` indexes into it.
    site_tile: Vec<TileCoord>,
    class_sites: BTreeMap<ResourceClass, Vec<usize>>,
    occupant: Vec<u32>,
    unit_site: Vec<usize>,
    fixed: Vec<bool>,
    nets: Vec<Vec<u32>>,
    unit_nets: Vec<Vec<u32>>,
    net_cost: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
}

const FREE: u32 = u32::MAX;

impl Annealer {
    fn bbox(&self, net: usize) -> usize {
        let mut it = self.nets[net].iter().map(|&u| self.site_tile[self.unit_site[u as usize]]);
        let first = it.next().unwrap();
        let (mut r0, mut r1, mut c0, mut c1) = (first.row, first.row, first.col, first.col);
        for t in it {
            r0 = r0.min(t.row);
            r1 = r1.max(t.row);
            c0 = c0.min(t.col);
            c1 = c1.max(t.col);
        }
        (r1 - r0) + (c1 - c0)
    }

    fn total(&self) -> usize {
        self.net_cost.iter().sum()
    }

    /// Moves `u` to global site `to`, swapping with its occupant. Returns
    /// the cost delta and the touched nets with their old costs.
    fn apply(&mut self, u: usize, to: usize, touched: &mut Vec<(u32, usize)>) -> i64 {
        let from = self.unit_site[u];
        let v = self.occupant[to];
        self.occupant[from] = v;
        self.occupant[to] = u as u32;
        self.unit_site[u] = to;
        if v != FREE {
            self.unit_site[v as usize] = from;
        }
        self.epoch += 1;
        touched.clear();
        let mut delta = 0i64;
        for w in [Some(u as u32), (v != FREE).then_some(v)].into_iter().flatten() {
            for k in 0..self.unit_nets[w as usize].len() {
                let n = self.unit_nets[w as usize][k] as usize;
                if self.stamp[n] == self.epoch {
                    continue;
                }
                self.stamp[n] = self.epoch;
                let old = self.net_cost[n];
                let new = self.bbox(n);
                self.net_cost[n] = new;
                touched.push((n as u32, old));
                delta += new as i64 - old as i64;
            }
        }
        delta
    }

    fn undo(&mut self, u: usize, from: usize, touched: &[(u32, usize)]) {
        let to = self.unit_site[u];
        let v = self.occupant[from];
        self.occupant[to] = v;
        self.occupant[from] = u as u32;
        self.unit_site[u] = from;
        if v != FREE {
            self.unit_site[v as usize] = to;
        }
        for &(n, old) in touched {
            self.net_cost[n as usize] = old;
        }
    }

    /// A random target site for `u` within `rlim` (Chebyshev) of its tile.
    fn pick(&self, rng: &mut ChaCha8Rng, class: ResourceClass, u: usize, rlim: usize) -> Option<usize> {
        let list = &self.class_sites[&class];
        let here = self.site_tile[self.unit_site[u]];
        for _ in 0..16 {
            let s = list[rng.gen_range(0..list.len())];
            let t = self.site_tile[s];
            if s == self.unit_site[u] || t.row.abs_diff(here.row).max(t.col.abs_diff(here.col)) > rlim {
                continue;
            }
            let occ = self.occupant[s];
            if occ != FREE && self.fixed[occ as usize] {
                continue;
            }
            return Some(s);
        }
        None
    }
}

pub fn place_with(netlist: &Netlist, layout: &FabricLayout, opts: &PlaceOptions) -> Result<Placement, PlaceError> {
    netlist.validate()?;
    let units = pack(netlist);
    let mut cell_unit = vec![None; netlist.cells().len()];
    for (u, unit) in units.iter().enumerate() {
        for c in unit.cells() {
            cell_unit[c.0 as usize] = Some(u as u32);
        }
    }

    let mut site_tile = Vec::new();
    let mut class_sites = BTreeMap::new();
    let mut site_index = BTreeMap::new();
    for class in ResourceClass::ALL {
        let list = sites(layout, class);
        let needed = units.iter().filter(|u| u.class() == class).count();
        if needed > list.len() {
            return Err(PlaceError::CapacityExceeded { class, needed, available: list.len() });
        }
        let mut ids = Vec::new();
        for s in list {
            site_index.insert((class, s), site_tile.len());
            ids.push(site_tile.len());
            site_tile.push(s.tile);
        }
        class_sites.insert(class, ids);
    }
    let all_sites: BTreeMap<usize, Site> = site_index.iter().map(|(&(_, s), &i)| (i, s)).collect();

    let mut occupant = vec![FREE; site_tile.len()];
    let mut unit_site = vec![usize::MAX; units.len()];
    let mut fixed = vec![false; units.len()];
    let io_map = IoMap::new(layout);
    for (u, unit) in units.iter().enumerate() {
        let (Unit::Input(c) | Unit::Output(c)) = *unit else { continue };
        let cell = netlist.cell(c);
        let Some(pin) = cell.pin else { continue };
        let conflict = || PlaceError::PinConflict { port: cell.name.clone() };
        let (tile, index) = io_map.location(pin.bank, pin.index).ok_or_else(conflict)?;
        let s = site_index[&(unit.class(), Site { tile, index })];
        if occupant[s] != FREE {
            return Err(conflict());
        }
        occupant[s] = u as u32;
        unit_site[u] = s;
        fixed[u] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for class in ResourceClass::ALL {
        let mut free: Vec<usize> = class_sites[&class].iter().copied().filter(|&s| occupant[s] == FREE).collect();
        for i in (1..free.len()).rev() {
            let j = rng.gen_range(0..=i);
            free.swap(i, j);
        }
        let mut free = free.into_iter();
        for (u, unit) in units.iter().enumerate() {
            if unit.class() == class && unit_site[u] == usize::MAX {
                let s = free.next().expect("capacity checked");
                occupant[s] = u as u32;
                unit_site[u] = s;
            }
        }
    }

    // Nets seen by the annealer: distinct units on non-constant nets.
    let mut nets = Vec::new();
    let mut unit_nets = vec![Vec::new(); units.len()];
    for id in netlist.net_ids() {
        if netlist.constant(id).is_some() {
            continue;
        }
        let net = netlist.net(id);
        let mut terms: Vec<u32> = net
            .driver
            .iter()
            .chain(&net.sinks)
            .filter_map(|&(c, _)| cell_unit[c.0 as usize])
            .collect();
        terms.sort_unstable();
        terms.dedup();
        if terms.len() < 2 {
            continue;
        }
        for &u in &terms {
            unit_nets[u as usize].push(nets.len() as u32);
        }
        nets.push(terms);
    }
    let net_count = nets.len();
    let mut a = Annealer {
        site_tile,
        class_sites,
        occupant,
        unit_site,
        fixed,
        nets,
        unit_nets,
        net_cost: vec![0; net_count],
        stamp: vec![0; net_count],
        epoch: 0,
    };
    for n in 0..net_count {
        a.net_cost[n] = a.bbox(n);
    }

    let movable: Vec<usize> = (0..units.len()).filter(|&u| !a.fixed[u]).collect();
    let mut temperatures = 0;
    if !movable.is_empty() && net_count > 0 {
        let max_r = layout.rows().max(layout.cols());
        let mut touched = Vec::new();
        let mut rlim = max_r;

        // Start temperature from a random walk: mean uphill delta / ln 2.
        let mut uphill = Vec::new();
        for _ in 0..movable.len().max(64) {
            let u = movable[rng.gen_range(0..movable.len())];
            if let Some(to) = a.pick(&mut rng, units[u].class(), u, rlim) {
                let d = a.apply(u, to, &mut touched);
                if d > 0 {
                    uphill.push(d as f64);
                }
            }
        }
        let mean_up = if uphill.is_empty() { 1.0 } else { uphill.iter().sum::<f64>() / uphill.len() as f64 };
        let mut t = mean_up / std::f64::consts::LN_2;
        let moves = opts.moves_per_unit * movable.len();
        loop {
            let mut accepted = 0usize;
            for _ in 0..moves {
                let u = movable[rng.gen_range(0..movable.len())];
                let Some(to) = a.pick(&mut rng, units[u].class(), u, rlim) else { continue };
                let from = a.unit_site[u];
                let d = a.apply(u, to, &mut touched);
                let accept = d <= 0 || rng.gen::<f64>() < (-(d as f64) / t).exp();
                if accept {
                    accepted += 1;
                } else {
                    a.undo(u, from, &touched);
                }
            }
            temperatures += 1;
            let rate = accepted as f64 / moves as f64;
            rlim = ((rlim as f64 * (0.56 + rate)).round() as usize).clamp(1, max_r);
            t *= opts.cooling;
            let floor = 0.005 * a.total() as f64 / net_count as f64;
            if t < floor || accepted == 0 || temperatures >= opts.max_temperatures {
                break;
            }
        }
        // greedy quench
        for _ in 0..moves {
            let u = movable[rng.gen_range(0..movable.len())];
            let Some(to) = a.pick(&mut rng, units[u].class(), u, rlim) else { continue };
            let from = a.unit_site[u];
            if a.apply(u, to, &mut touched) > 0 {
                a.undo(u, from, &touched);
            }
        }
    }

    let cost = a.total();
    let sites = a.unit_site.iter().map(|s| all_sites[s]).collect();
    Ok(Placement { units, sites, cost, temperatures, cell_unit })
}

/// Total HPWL of a placement recomputed from scratch.
pub fn wirelength(netlist: &Netlist, placement: &Placement) -> usize {
    let mut total = 0;
    for id in netlist.net_ids() {
        if netlist.constant(id).is_some() {
            continue;
        }
        let net = netlist.net(id);
        let tiles: Vec<TileCoord> =
            net.driver.iter().chain(&net.sinks).filter_map(|&(c, _)| placement.site_of(c)).map(|s| s.tile).collect();
        let units: std::collections::BTreeSet<usize> =
            net.driver.iter().chain(&net.sinks).filter_map(|&(c, _)| placement.unit_of(c)).collect();
        if units.len() < 2 {
            continue;
        }
        let r0 = tiles.iter().map(|t| t.row).min().unwrap();
        let r1 = tiles.iter().map(|t| t.row).max().unwrap();
        let c0 = tiles.iter().map(|t| t.col).min().unwrap();
        let c1 = tiles.iter().map(|t| t.col).max().unwrap();
        total += (r1 - r0) + (c1 - c0);
    }
    total
}

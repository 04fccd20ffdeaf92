// SPDX-License-Identifier: Apache-2.0

//! Netlist to bitstream: pack, place, route, configure.

mod config;
pub mod designs;
mod equiv;
mod netlist;
mod netlist_sim;
mod place;
mod route;

use thiserror::Error;

pub use config::{build_config, generate_config, PortMap};
pub use equiv::{random_equivalence, EquivReport};
pub use netlist::{Cell, CellId, CellKind, Net, NetId, Netlist, NetlistError, PinConstraint};
pub use netlist_sim::{netlist_sim, NetlistSim};
pub use place::{pack, place, place_with, sites, wirelength, PlaceError, PlaceOptions, Placement, ResourceClass, Site, Unit};
pub use route::{net_pins, route, route_pins, NetPins, RouteError, RoutedNet, RoutingResult, MAX_ITERATIONS};

use crate::bitstream::{BitstreamError, FabricConfig};
use crate::fabric::FabricLayout;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Place(#[from] PlaceError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
    #[error("flow self-check failed: {0}")]
    Check(String),
}

/// Everything the flow produced for one design.
#[derive(Clone, Debug)]
pub struct Flow {
    pub placement: Placement,
    pub routing: RoutingResult,
    pub config: FabricConfig,
    pub image: Vec<u8>,
    pub ports: PortMap,
}

/// Place, route and generate a bitstream, checking placement legality and
/// routing congestion on the way.
pub fn run_flow(netlist: &Netlist, layout: &FabricLayout, seed: u64) -> Result<Flow, FlowError> {
    run_flow_with(netlist, layout, &PlaceOptions::new(seed))
}

pub fn run_flow_with(netlist: &Netlist, layout: &FabricLayout, opts: &PlaceOptions) -> Result<Flow, FlowError> {
    netlist.validate()?;
    let placement = place_with(netlist, layout, opts)?;
    placement.check(netlist, layout).map_err(FlowError::Check)?;
    let routing = route(netlist, &placement, layout)?;
    if routing.congestion > 1 {
        return Err(FlowError::Check(format!("congestion {}", routing.congestion)));
    }
    routing.verify(layout).map_err(FlowError::Check)?;
    let config = build_config(netlist, &placement, &routing, layout);
    let image = crate::bitstream::encode_bitstream(layout, &config)?;
    let ports = PortMap::new(netlist, &placement, layout);
    log::info!(
        "flow {}: {} units, HPWL {}, {} wires, {} routing iterations",
        netlist.name,
        placement.units.len(),
        placement.cost,
        routing.wire_count(),
        routing.iterations
    );
    Ok(Flow { placement, routing, config, image, ports })
}

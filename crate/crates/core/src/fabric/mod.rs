// SPDX-License-Identifier: Apache-2.0

//! Tile taxonomy, layout files and resource census.

mod layout;
mod tile;

pub use layout::{census, FabricLayout, LayoutError, TileCoord};
pub use tile::{CellCounts, ResourceCensus, TileKind};

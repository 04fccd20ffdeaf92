// SPDX-License-Identifier: Apache-2.0

//! Software twin of a small island-style eFPGA: tile layouts and census,
//! the configuration image format, a cycle-accurate fabric simulator, and
//! a netlist-level place-and-route flow that produces images for it.

pub mod arch;
pub mod bitstream;
pub mod cad;
pub mod crc;
pub mod fabric;
pub mod sim;

pub use bitstream::{decode_bitstream, encode_bitstream, BitstreamError, ConfigBits, FabricConfig};
pub use fabric::{census, FabricLayout, LayoutError, ResourceCensus, TileCoord, TileKind};

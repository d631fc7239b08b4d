//! Printable outputs: binary STL and planar-sliced G-code.

pub mod gcode;
pub mod slicer;
pub mod stl;

pub use gcode::{quantize, Command, GcodeProgram, Move};
pub use slicer::{cross_section, plan_layers, slice, Layer, SlicerConfig};
pub use stl::{encode_stl, parse_stl, stl_volume, write_stl, StlTriangle};

use thiserror::Error;

use crate::flatten::PatchSolid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FabricateError {
    #[error("solid has no triangles")]
    EmptySolid,
    #[error("{0} triangles exceed the STL count field")]
    TooManyTriangles(usize),
    #[error("malformed STL: {0}")]
    MalformedStl(String),
    #[error("G-code line {line}: {message}")]
    Gcode { line: usize, message: String },
    #[error("cross-section at z = {z} mm does not close")]
    OpenContour { z: f64 },
    #[error("solid is {thickness} mm thick, below one {layer_height} mm layer")]
    TooThin { thickness: f64, layer_height: f64 },
    #[error("invalid slicer config: {0}")]
    Config(String),
}

/// STL bytes and G-code text for one solid.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub stl: Vec<u8>,
    pub gcode: String,
}

pub fn fabricate(solid: &PatchSolid, cfg: &SlicerConfig) -> Result<Artifacts, FabricateError> {
    let stl = write_stl(solid)?;
    let gcode = slice(solid, cfg)?.to_text();
    Ok(Artifacts { stl, gcode })
}

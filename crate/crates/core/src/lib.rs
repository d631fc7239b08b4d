//! Wound capture to printable patch.
//!
//! One RGB-D capture plus a wound score map goes in; a confirmed boundary
//! polygon, a filtered surface mesh, a flattened solid and printable STL /
//! G-code come out. Positions are meters in the camera frame, pixel
//! coordinates follow the raster's `(x, y)` with pixel centers on integers.

pub mod bgpcp;
pub mod capture;
pub mod eval;
pub mod fabricate;
pub mod flatten;
pub mod meshing;
pub mod pipeline;
pub mod geometry;
pub mod prep;
pub mod raster;
pub mod segmentation;

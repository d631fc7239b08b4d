//! From score rasters to a confirmed wound boundary.
//!
//! Components are 4-connected; their outer border is traced along pixel
//! edges, so a boundary's shoelace area equals the (hole-filled) component's
//! pixel count. Pixel `(x, y)` covers `[x - 0.5, x + 0.5] x [y - 0.5, y + 0.5]`.

mod component;
mod contour;
mod fusion;
mod polygon;

pub use component::{fill_holes, select_component, MaskRle};
pub use contour::extract_boundary;
pub use fusion::{fuse_attention, AttentionStack};
pub use polygon::{BoundaryPolygon, SIMPLIFY_TOLERANCE_PX};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("seed ({x}, {y}) outside {width}x{height} raster")]
    SeedOutside {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("seed score {score} below threshold {threshold}")]
    SeedBelowThreshold { score: f64, threshold: f64 },
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("mask is empty")]
    EmptyMask,
    #[error("raster dimensions differ: {0}")]
    DimensionMismatch(String),
    #[error("attention stack needs at least one branch")]
    NoBranches,
    #[error("non-finite logit in branch {branch}")]
    NonFinite { branch: usize },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite vertex coordinate")]
    NonFiniteVertex,
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("edges {first} and {second} intersect")]
    SelfIntersection { first: usize, second: usize },
    #[error("vertex index {index} out of range for {len} vertices")]
    VertexIndex { index: usize, len: usize },
}

/// Score cut-off in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, SegmentationError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(SegmentationError::InvalidThreshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = SegmentationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

//! Boundary-guided point-cloud processing.
//!
//! Depth outliers concentrate where the sensor straddles the wound rim, so
//! radius filtering is run only on a thin band around the confirmed boundary.
//! The band half-width is `0.1 * sqrt(A)` px for a boundary of area `A` px².

mod distance;
mod filter;

pub use distance::{distance_transform, edge_pixels, polyline_band};
pub use filter::{
    all_outliers, band_outliers, radius_filter, whole_cloud_filter, RadiusFilter, SpatialHash,
    DEFAULT_MIN_NEIGHBORS, DEFAULT_RADIUS_PITCHES,
};

use nalgebra::Point3;
use thiserror::Error;

use crate::capture::{DepthMap, Intrinsics};
use crate::geometry::contains_point;
use crate::raster::Mask;
use crate::segmentation::BoundaryPolygon;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BgpcpError {
    #[error("boundary raster is empty")]
    EmptyBoundary,
    #[error("no valid depth inside the boundary")]
    NoValidPoints,
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("min_neighbors must be at least 1")]
    InvalidMinNeighbors,
}

/// Band half-width in px for a boundary of `area` px².
pub fn band_distance(area: f64) -> f64 {
    0.1 * area.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingBand {
    pub mask: Mask,
    pub distance: f64,
}

/// Pixels whose center is within `band_distance(area)` of the boundary polyline.
pub fn build_band(boundary: &BoundaryPolygon, width: usize, height: usize) -> ProcessingBand {
    let distance = band_distance(boundary.area());
    ProcessingBand {
        mask: polyline_band(boundary.vertices(), width, height, distance),
        distance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    /// Camera frame, meters.
    pub position: Point3<f64>,
    pub pixel: (usize, usize),
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    /// Back-projects every valid-depth pixel whose center lies inside `boundary`.
    pub fn from_boundary(
        depth: &DepthMap,
        k: &Intrinsics,
        boundary: &BoundaryPolygon,
        band: &ProcessingBand,
    ) -> Result<Self, BgpcpError> {
        let ring = boundary.vertices();
        let (lo, hi) = boundary.bounds();
        let x0 = lo[0].ceil().max(0.0) as usize;
        let y0 = lo[1].ceil().max(0.0) as usize;
        let x1 = (hi[0].floor().max(-1.0) as i64).min(depth.width() as i64 - 1);
        let y1 = (hi[1].floor().max(-1.0) as i64).min(depth.height() as i64 - 1);
        let mut points = Vec::new();
        for y in y0 as i64..=y1 {
            for x in x0 as i64..=x1 {
                let (x, y) = (x as usize, y as usize);
                let Some(d) = depth.at(x, y) else { continue };
                if !contains_point(ring, [x as f64, y as f64]) {
                    continue;
                }
                let position = k
                    .back_project(x as f64, y as f64, d)
                    .expect("valid depth is positive");
                points.push(CloudPoint {
                    position,
                    pixel: (x, y),
                    in_band: band.mask.get_checked(x as i64, y as i64) == Some(&true),
                });
            }
        }
        if points.is_empty() {
            return Err(BgpcpError::NoValidPoints);
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn band_count(&self) -> usize {
        self.points.iter().filter(|p| p.in_band).count()
    }

    /// Copy with the given (sorted or unsorted) indices removed.
    pub fn without(&self, remove: &[usize]) -> Self {
        let mut drop = vec![false; self.points.len()];
        for &i in remove {
            drop[i] = true;
        }
        Self {
            points: self
                .points
                .iter()
                .zip(&drop)
                .filter(|(_, &d)| !d)
                .map(|(p, _)| *p)
                .collect(),
        }
    }
}

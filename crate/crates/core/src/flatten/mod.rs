//! Conformal flattening of the wound surface and extrusion to a patch solid.

mod bff;

pub use bff::{corner_angles, flatten};

use std::collections::HashMap;

use nalgebra::Point3;
use thiserror::Error;

use crate::geometry::{orient, Vec2};
use crate::meshing::topology::euler_characteristic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlattenError {
    #[error("mesh is not a disk")]
    NotDisk,
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("thickness must be positive, got {0}")]
    InvalidThickness(f64),
}

/// Planar embedding in meters with the source mesh's connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMesh {
    pub uv: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_loop: Vec<usize>,
}

impl FlatMesh {
    pub fn triangle_signed_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangles[i].map(|v| self.uv[v]);
        0.5 * orient(a, b, c)
    }

    pub fn signed_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_signed_area(i)).sum()
    }

    pub fn flipped_count(&self) -> usize {
        (0..self.triangles.len())
            .filter(|&i| self.triangle_signed_area(i) <= 0.0)
            .count()
    }
}

/// Closed solid: bottom copy at `w = 0`, top copy at `w = thickness`, side
/// walls along the boundary loop. Faces are oriented outward.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSolid {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub thickness: f64,
}

impl PatchSolid {
    /// Signed volume by the divergence theorem, m³.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Every undirected edge bounds exactly two faces, traversed once in each direction.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn euler_characteristic(&self) -> i64 {
        euler_characteristic(&self.triangles)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Prism over `flat` with height `thickness` meters.
pub fn extrude(flat: &FlatMesh, thickness: f64) -> Result<PatchSolid, FlattenError> {
    if !(thickness > 0.0 && thickness.is_finite()) {
        return Err(FlattenError::InvalidThickness(thickness));
    }
    let n = flat.uv.len();
    let mut vertices: Vec<Point3<f64>> = flat.uv.iter().map(|p| Point3::new(p[0], p[1], 0.0)).collect();
    vertices.extend(flat.uv.iter().map(|p| Point3::new(p[0], p[1], thickness)));
    let mut triangles = Vec::with_capacity(2 * flat.triangles.len() + 2 * flat.boundary_loop.len());
    for t in &flat.triangles {
        triangles.push([t[0], t[2], t[1]]);
        triangles.push([t[0] + n, t[1] + n, t[2] + n]);
    }
    let b = &flat.boundary_loop;
    for k in 0..b.len() {
        // the loop runs counter-clockwise, so outward is to its right
        let (a, c) = (b[k], b[(k + 1) % b.len()]);
        triangles.push([a, c, c + n]);
        triangles.push([a, c + n, a + n]);
    }
    Ok(PatchSolid {
        vertices,
        triangles,
        thickness,
    })
}

//! Delaunay surface meshing of the in-boundary point cloud.
//!
//! Filtered cloud pixels plus densified boundary samples are triangulated in
//! the image plane, triangles with an edge midpoint outside the boundary are
//! carved away, and the result is lifted to camera space.

mod delaunay;
pub mod topology;

pub use delaunay::{carve_concavity, triangulate};

use std::fmt::Write as _;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::bgpcp::PointCloud;
use crate::capture::Intrinsics;
use crate::geometry::{orient, Vec2};
use crate::raster::Raster;
use crate::segmentation::BoundaryPolygon;

use topology::{boundary_loops, euler_characteristic, face_components, split_pinched_vertices};

/// Vertex budget above which in-boundary pixels are subsampled on a regular grid.
pub const MAX_MESH_PIXELS: usize = 20_000;
/// Pixel radius for the local plane fit that places boundary samples in depth.
const BOUNDARY_FIT_RADIUS_PX: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshingError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("carving removed every triangle")]
    CarvedEmpty,
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    #[error("mesh is not a disk (euler characteristic {euler}, {loops} boundary loops)")]
    NotDisk { euler: i64, loops: usize },
    #[error("triangle {0} is degenerate")]
    Degenerate(usize),
    #[error("vertex {0} has no lifted position")]
    MissingPosition(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVertex {
    /// Camera frame, meters.
    pub position: Point3<f64>,
    /// Source image position, px.
    pub pixel: Vec2,
}

/// Disk-topology triangle mesh. Triangles are counter-clockwise in pixel
/// space and `boundary_loop` follows the same orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<MeshVertex>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_loop: Vec<usize>,
}

impl SurfaceMesh {
    /// Compacts unreferenced vertices, splits pinched vertices and checks for
    /// a single-loop disk with non-degenerate faces.
    pub fn new(vertices: Vec<MeshVertex>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshingError> {
        if triangles.is_empty() {
            return Err(MeshingError::EmptyMesh);
        }
        let (triangles, origin) = split_pinched_vertices(vertices.len(), &triangles);
        let mut remap = vec![usize::MAX; origin.len()];
        let mut kept = Vec::new();
        let mut tris = triangles;
        for t in &mut tris {
            for v in t.iter_mut() {
                if remap[*v] == usize::MAX {
                    remap[*v] = kept.len();
                    kept.push(vertices[origin[*v]]);
                }
                *v = remap[*v];
            }
        }
        let mesh = Self {
            vertices: kept,
            triangles: tris,
            boundary_loop: Vec::new(),
        };
        for (i, _) in mesh.triangles.iter().enumerate() {
            if mesh.triangle_area(i) <= 0.0 {
                return Err(MeshingError::Degenerate(i));
            }
        }
        let loops = boundary_loops(&mesh.triangles)?;
        let euler = euler_characteristic(&mesh.triangles);
        if euler != 1 || loops.len() != 1 {
            return Err(MeshingError::NotDisk {
                euler,
                loops: loops.len(),
            });
        }
        Ok(Self {
            boundary_loop: loops.into_iter().next().expect("one loop"),
            ..mesh
        })
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangles[i].map(|v| self.vertices[v].position);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Total surface area, m².
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        euler_characteristic(&self.triangles)
    }

    /// Wavefront OBJ with positions and faces only.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let p = v.position;
            let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }
}

/// Lifts a planar triangulation. Vertices without a position are dropped
/// along with their incident triangles before the disk check.
pub fn lift(
    points2d: &[Vec2],
    tris: &[[usize; 3]],
    positions: &[Option<Point3<f64>>],
) -> Result<SurfaceMesh, MeshingError> {
    let kept: Vec<[usize; 3]> = tris
        .iter()
        .copied()
        .filter(|t| t.iter().all(|&v| positions[v].is_some()))
        .collect();
    let vertices = points2d
        .iter()
        .zip(positions)
        .map(|(&pixel, p)| MeshVertex {
            position: p.unwrap_or_else(Point3::origin),
            pixel,
        })
        .collect();
    SurfaceMesh::new(vertices, kept)
}

/// Stride of the regular subsampling grid for `n` in-boundary pixels.
pub fn subsample_stride(n: usize) -> usize {
    if n <= MAX_MESH_PIXELS {
        1
    } else {
        ((n as f64 / MAX_MESH_PIXELS as f64).sqrt().ceil()) as usize
    }
}

/// Points along the closed ring spaced at most `spacing` apart, vertices included.
pub fn densify_ring(ring: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let n = ring.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let steps = ((len / spacing).ceil() as usize).max(1);
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Depth at `p` from a least-squares plane over nearby cloud points, falling
/// back to the nearest point when the neighbourhood is degenerate.
fn depth_at(p: Vec2, cloud: &PointCloud, lookup: &Raster<Option<u32>>, radius: f64) -> Option<f64> {
    let mut near: Vec<(f64, f64, f64)> = Vec::new();
    let r = radius.ceil() as i64;
    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
    for y in (cy - r)..=(cy + r) {
        for x in (cx - r)..=(cx + r) {
            if let Some(Some(i)) = lookup.get_checked(x, y) {
                let (dx, dy) = (x as f64 - p[0], y as f64 - p[1]);
                if dx.hypot(dy) <= radius {
                    near.push((dx, dy, cloud.points[*i as usize].position.z));
                }
            }
        }
    }
    if near.len() >= 3 {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for &(dx, dy, z) in &near {
            let row = Vector3::new(1.0, dx, dy);
            ata += row * row.transpose();
            atb += row * z;
        }
        if ata.determinant().abs() > 1e-9 * ata.norm().powi(3) {
            if let Some(sol) = ata.lu().solve(&atb) {
                return Some(sol[0]);
            }
        }
    }
    near.iter()
        .min_by(|a, b| a.0.hypot(a.1).total_cmp(&b.0.hypot(b.1)))
        .map(|n| n.2)
}

/// Edge-connected component holding `seed`, or the one with the largest planar area.
pub fn pick_component(points2d: &[Vec2], tris: &[[usize; 3]], seed: Option<Vec2>) -> Vec<[usize; 3]> {
    let comps = face_components(tris);
    if comps.is_empty() {
        return Vec::new();
    }
    let twice_area = |f: usize| {
        let t = tris[f];
        orient(points2d[t[0]], points2d[t[1]], points2d[t[2]])
    };
    let holds_seed = |f: usize, s: Vec2| {
        let [a, b, c] = tris[f].map(|v| points2d[v]);
        orient(a, b, s) >= 0.0 && orient(b, c, s) >= 0.0 && orient(c, a, s) >= 0.0
    };
    let seeded = seed.and_then(|s| comps.iter().position(|c| c.iter().any(|&f| holds_seed(f, s))));
    let pick = seeded.unwrap_or_else(|| {
        let area = |c: &Vec<usize>| c.iter().map(|&f| twice_area(f)).sum::<f64>();
        (0..comps.len())
            .max_by(|&a, &b| area(&comps[a]).total_cmp(&area(&comps[b])))
            .expect("non-empty")
    });
    comps[pick].iter().map(|&f| tris[f]).collect()
}

/// Builds the wound surface from a filtered cloud. The carved component
/// containing `seed` (px) is kept, or the one with the largest planar area.
pub fn build_surface(
    cloud: &PointCloud,
    boundary: &BoundaryPolygon,
    k: &Intrinsics,
    seed: Option<Vec2>,
) -> Result<SurfaceMesh, MeshingError> {
    if cloud.is_empty() {
        return Err(MeshingError::EmptyMesh);
    }
    let stride = subsample_stride(cloud.len());
    let mut lookup: Raster<Option<u32>> = Raster::filled(k.width, k.height, None);
    for (i, p) in cloud.points.iter().enumerate() {
        if p.pixel.0 < k.width && p.pixel.1 < k.height {
            *lookup.get_mut(p.pixel.0, p.pixel.1) = Some(i as u32);
        }
    }

    let mut points2d: Vec<Vec2> = Vec::new();
    let mut positions: Vec<Option<Point3<f64>>> = Vec::new();
    for p in &cloud.points {
        if p.pixel.0 % stride == 0 && p.pixel.1 % stride == 0 {
            points2d.push([p.pixel.0 as f64, p.pixel.1 as f64]);
            positions.push(Some(p.position));
        }
    }
    let ring = boundary.vertices();
    let fit_radius = BOUNDARY_FIT_RADIUS_PX * stride as f64;
    for q in densify_ring(ring, stride as f64) {
        let z = depth_at(q, cloud, &lookup, fit_radius)
            .or_else(|| depth_at(q, cloud, &lookup, 2.0 * fit_radius))
            .or_else(|| depth_at(q, cloud, &lookup, 8.0 * fit_radius));
        points2d.push(q);
        positions.push(z.filter(|&z| z > 0.0).and_then(|z| k.back_project(q[0], q[1], z).ok()));
    }

    let tris = triangulate(&points2d)?;
    let carved = carve_concavity(&points2d, &tris, ring);
    if carved.is_empty() {
        return Err(MeshingError::CarvedEmpty);
    }
    let chosen = pick_component(&points2d, &carved, seed);
    lift(&points2d, &chosen, &positions)
}

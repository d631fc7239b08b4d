#![allow(dead_code)]

use nalgebra::{Matrix2, Point3, Rotation3, Vector3};
use woundpatch::flatten::FlatMesh;
use woundpatch::meshing::{triangulate, MeshVertex, SurfaceMesh};

/// Delaunay mesh over jittered samples of the unit square, mapped to 3D.
pub fn param_mesh(n: usize, seed: u64, map: impl Fn(f64, f64) -> Point3<f64>) -> SurfaceMesh {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut jitter = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.3
    };
    let mut pts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let edge = i == 0 || j == 0 || i == n || j == n;
            let (dx, dy) = if edge { (0.0, 0.0) } else { (jitter(), jitter()) };
            pts.push([(i as f64 + dx) / n as f64, (j as f64 + dy) / n as f64]);
        }
    }
    let tris = triangulate(&pts).unwrap();
    let vertices = pts
        .iter()
        .map(|p| MeshVertex {
            position: map(p[0], p[1]),
            pixel: *p,
        })
        .collect();
    SurfaceMesh::new(vertices, tris).unwrap()
}

/// Delaunay mesh over a polar grid of the unit disk, mapped to 3D.
pub fn disk_mesh(rings: usize, map: impl Fn(f64, f64) -> Point3<f64>) -> SurfaceMesh {
    let mut pts = vec![[0.0, 0.0]];
    for r in 1..=rings {
        let rho = r as f64 / rings as f64;
        let m = 6 * r;
        for k in 0..m {
            let a = (k as f64 + 0.5 * (r % 2) as f64) / m as f64 * std::f64::consts::TAU;
            pts.push([rho * a.cos(), rho * a.sin()]);
        }
    }
    let tris = triangulate(&pts).unwrap();
    let vertices = pts
        .iter()
        .map(|p| MeshVertex {
            position: map(p[0], p[1]),
            pixel: *p,
        })
        .collect();
    SurfaceMesh::new(vertices, tris).unwrap()
}

/// Residual of the best planar rigid alignment of `a` onto `b` (max vertex distance).
pub fn procrustes_residual(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let n = a.len() as f64;
    let ca = a.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0] / n, s[1] + p[1] / n]);
    let cb = b.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0] / n, s[1] + p[1] / n]);
    let mut h = Matrix2::zeros();
    for (p, q) in a.iter().zip(b) {
        let u = nalgebra::Vector2::new(p[0] - ca[0], p[1] - ca[1]);
        let v = nalgebra::Vector2::new(q[0] - cb[0], q[1] - cb[1]);
        h += u * v.transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix2::identity();
        fix[(1, 1)] = -1.0;
        r = vt.transpose() * fix * u.transpose();
    }
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let u = nalgebra::Vector2::new(p[0] - ca[0], p[1] - ca[1]);
            let m = r * u;
            (m.x + cb[0] - q[0]).hypot(m.y + cb[1] - q[1])
        })
        .fold(0.0, f64::max)
}

pub fn rigid(mesh: &SurfaceMesh, axis: Vector3<f64>, angle: f64, shift: Vector3<f64>) -> SurfaceMesh {
    let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    let mut m = mesh.clone();
    for v in &mut m.vertices {
        v.position = r * v.position + shift;
    }
    m
}

/// Largest corner-angle difference (degrees) between the surface and its flattening.
pub fn max_angle_error_deg(mesh: &SurfaceMesh, flat: &FlatMesh) -> f64 {
    let p3: Vec<Point3<f64>> = mesh.vertices.iter().map(|v| v.position).collect();
    let p2: Vec<Point3<f64>> = flat.uv.iter().map(|p| Point3::new(p[0], p[1], 0.0)).collect();
    let a3 = woundpatch::flatten::corner_angles(&p3, &mesh.triangles);
    let a2 = woundpatch::flatten::corner_angles(&p2, &flat.triangles);
    a3.iter()
        .flatten()
        .zip(a2.iter().flatten())
        .map(|(x, y)| (x - y).abs().to_degrees())
        .fold(0.0, f64::max)
}

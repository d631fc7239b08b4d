use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{Matrix2, Matrix3, Point3, SymmetricEigen, Vector2, Vector3};

use crate::geometry::{find_self_intersection, orient, Vec2};
use crate::meshing::SurfaceMesh;

use super::{FlatMesh, FlattenError};

/// Interior angles of every triangle, in corner order.
pub fn corner_angles(positions: &[Point3<f64>], tris: &[[usize; 3]]) -> Vec<[f64; 3]> {
    tris.iter()
        .map(|t| {
            let mut out = [0.0; 3];
            for c in 0..3 {
                let p = positions[t[c]];
                let a = positions[t[(c + 1) % 3]] - p;
                let b = positions[t[(c + 2) % 3]] - p;
                out[c] = a.cross(&b).norm().atan2(a.dot(&b));
            }
            out
        })
        .collect()
}

/// Cotangent Laplacian as symmetric entries `(i, j) -> w`, positive semidefinite.
fn cotan_laplacian(angles: &[[f64; 3]], tris: &[[usize; 3]]) -> Result<Laplacian, FlattenError> {
    let mut l = Laplacian::new();
    for (f, (t, ang)) in tris.iter().zip(angles).enumerate() {
        for c in 0..3 {
            let s = ang[c].sin();
            if s <= 0.0 {
                return Err(FlattenError::DegenerateTriangle(f));
            }
            // the corner opposite edge (i, j)
            let w = 0.5 * ang[c].cos() / s;
            let (i, j) = (t[(c + 1) % 3], t[(c + 2) % 3]);
            *l.entry((i, j)).or_default() -= w;
            *l.entry((j, i)).or_default() -= w;
            *l.entry((i, i)).or_default() += w;
            *l.entry((j, j)).or_default() += w;
        }
    }
    Ok(l)
}

struct Blocks {
    /// global vertex -> position within the interior or boundary block
    local: Vec<usize>,
    is_boundary: Vec<bool>,
    n_interior: usize,
}

fn split_blocks(n: usize, boundary: &[usize]) -> Blocks {
    let mut is_boundary = vec![false; n];
    let mut local = vec![0; n];
    for (k, &b) in boundary.iter().enumerate() {
        is_boundary[b] = true;
        local[b] = k;
    }
    let mut n_interior = 0;
    for v in 0..n {
        if !is_boundary[v] {
            local[v] = n_interior;
            n_interior += 1;
        }
    }
    Blocks {
        local,
        is_boundary,
        n_interior,
    }
}

type Laplacian = BTreeMap<(usize, usize), f64>;

/// Copy of `lap` with every negative edge weight dropped, so the harmonic
/// extension obeys a maximum principle.
fn clamp_weights(lap: &Laplacian) -> Laplacian {
    let mut out = Laplacian::new();
    for (&(i, j), &w) in lap {
        if i != j && w < 0.0 {
            out.insert((i, j), w);
            *out.entry((i, i)).or_default() -= w;
        }
    }
    out
}

type Factor = faer::sparse::linalg::solvers::Llt<usize, f64>;

/// Interior-to-boundary couplings `(interior, boundary, weight)`.
type Coupling = Vec<(usize, usize, f64)>;

fn factor_interior(lap: &Laplacian, blocks: &Blocks) -> Result<(Option<Factor>, Coupling), FlattenError> {
    let ni = blocks.n_interior;
    let mut ii = Vec::new();
    let mut ib = Vec::new();
    for (&(i, j), &w) in lap {
        match (blocks.is_boundary[i], blocks.is_boundary[j]) {
            (false, false) => ii.push(Triplet::new(blocks.local[i], blocks.local[j], w)),
            (false, true) => ib.push((blocks.local[i], blocks.local[j], w)),
            _ => {}
        }
    }
    if ni == 0 {
        return Ok((None, ib));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(ni, ni, &ii)
        .map_err(|e| FlattenError::Solver(format!("{e:?}")))?;
    let llt = a
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| FlattenError::Solver(format!("{e:?}")))?;
    Ok((Some(llt), ib))
}

/// Fills interior `uv` with the harmonic extension of the boundary positions.
fn extend_interior(
    factor: &Option<Factor>,
    ib: &[(usize, usize, f64)],
    blocks: &Blocks,
    boundary: &[usize],
    uv: &mut [Vec2],
) {
    let Some(llt) = factor else { return };
    let mut rhs = Mat::<f64>::zeros(blocks.n_interior, 2);
    for &(i, b, w) in ib {
        let p = uv[boundary[b]];
        rhs[(i, 0)] -= w * p[0];
        rhs[(i, 1)] -= w * p[1];
    }
    let sol = llt.solve(&rhs);
    for v in 0..uv.len() {
        if !blocks.is_boundary[v] {
            let k = blocks.local[v];
            uv[v] = [sol[(k, 0)], sol[(k, 1)]];
        }
    }
}

fn flipped(uv: &[Vec2], tris: &[[usize; 3]]) -> Vec<usize> {
    (0..tris.len())
        .filter(|&f| orient(uv[tris[f][0]], uv[tris[f][1]], uv[tris[f][2]]) <= 0.0)
        .collect()
}

/// Gauss-Seidel uniform smoothing around flipped faces, growing the region
/// by one ring whenever a round leaves folds behind.
fn untangle(uv: &mut [Vec2], tris: &[[usize; 3]], blocks: &Blocks) {
    let n = uv.len();
    let mut ring: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in tris {
        for c in 0..3 {
            ring[t[c]].push(t[(c + 1) % 3]);
            ring[t[c]].push(t[(c + 2) % 3]);
        }
    }
    for r in &mut ring {
        r.sort_unstable();
        r.dedup();
    }
    for grow in 1..=UNTANGLE_ROUNDS {
        let bad = flipped(uv, tris);
        if bad.is_empty() {
            return;
        }
        let mut active = vec![false; n];
        let mut front: Vec<usize> = bad.iter().flat_map(|&f| tris[f]).collect();
        for _ in 0..grow {
            let mut next = Vec::new();
            for v in front.drain(..) {
                if !active[v] {
                    active[v] = true;
                    next.extend(&ring[v]);
                }
            }
            front = next;
        }
        for _ in 0..20 {
            for v in 0..n {
                if active[v] && !blocks.is_boundary[v] {
                    let k = ring[v].len() as f64;
                    let s = ring[v].iter().fold([0.0, 0.0], |s, &u| [s[0] + uv[u][0], s[1] + uv[u][1]]);
                    uv[v] = [s[0] / k, s[1] / k];
                }
            }
        }
    }
}

const UNTANGLE_ROUNDS: usize = 12;

fn boundary_is_simple(uv: &[Vec2], boundary: &[usize]) -> bool {
    let ring: Vec<Vec2> = boundary.iter().map(|&b| uv[b]).collect();
    find_self_intersection(&ring).is_none()
}

/// Central projection of every vertex onto the best-fit plane of the boundary.
/// Each vertex stays on its camera ray, so faces keep their pixel-space
/// orientation and none can fold.
fn rectified(positions: &[Point3<f64>], boundary: &[usize]) -> Option<Vec<Vec2>> {
    let nb = boundary.len() as f64;
    let c = boundary.iter().fold(Vector3::zeros(), |s, &b| s + positions[b].coords) / nb;
    let mut cov = Matrix3::zeros();
    for &b in boundary {
        let d = positions[b].coords - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let order = {
        let mut o = [0, 1, 2];
        o.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        o
    };
    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let e1: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
    let e2 = normal.cross(&e1);
    let offset = normal.dot(&c);
    let mut uv = Vec::with_capacity(positions.len());
    let mut side = 0.0;
    for p in positions {
        let den = normal.dot(&p.coords);
        if den == 0.0 || den * side < 0.0 {
            return None;
        }
        side = den;
        let q = p.coords * (offset / den) - c;
        uv.push([q.dot(&e1), q.dot(&e2)]);
    }
    Some(uv)
}

/// Boundary-first flattening with zero boundary scale factor: interior
/// curvature is pushed to the boundary, boundary lengths are kept, the
/// resulting curvature is integrated into a closed polygon and the interior
/// is extended harmonically. Area is then rescaled to the surface's.
///
/// Noisy surfaces can fold the result. The interior is then re-extended with
/// non-negative weights and untangled locally, and if that still folds, the
/// camera-frame mesh is projected along its viewing rays onto the plane of
/// its boundary.
pub fn flatten(mesh: &SurfaceMesh) -> Result<FlatMesh, FlattenError> {
    let n = mesh.vertices.len();
    let tris = &mesh.triangles;
    let boundary = &mesh.boundary_loop;
    if tris.is_empty() || boundary.len() < 3 {
        return Err(FlattenError::NotDisk);
    }
    let positions: Vec<Point3<f64>> = mesh.vertices.iter().map(|v| v.position).collect();
    let angles = corner_angles(&positions, tris);
    let lap = cotan_laplacian(&angles, tris)?;
    let blocks = split_blocks(n, boundary);
    let ni = blocks.n_interior;

    let mut angle_sum = vec![0.0; n];
    for (t, ang) in tris.iter().zip(&angles) {
        for c in 0..3 {
            angle_sum[t[c]] += ang[c];
        }
    }

    let (factor, ib) = factor_interior(&lap, &blocks)?;

    // scale factors that flatten the interior: L_II u = -K_I
    let mut u_interior = vec![0.0; ni];
    if let Some(llt) = &factor {
        let mut rhs = Mat::<f64>::zeros(ni, 1);
        for v in 0..n {
            if !blocks.is_boundary[v] {
                rhs[(blocks.local[v], 0)] = -(TAU - angle_sum[v]);
            }
        }
        let sol = llt.solve(&rhs);
        for (k, u) in u_interior.iter_mut().enumerate() {
            *u = sol[(k, 0)];
        }
        if u_interior.iter().any(|u| !u.is_finite()) {
            return Err(FlattenError::Solver("non-finite scale factors".into()));
        }
    }

    // target exterior angles: k + L_BI u_I
    let nb = boundary.len();
    let mut turn: Vec<f64> = boundary.iter().map(|&b| PI - angle_sum[b]).collect();
    for &(i, b, w) in &ib {
        turn[b] += w * u_interior[i];
    }

    let lengths: Vec<f64> = (0..nb)
        .map(|k| (positions[boundary[(k + 1) % nb]] - positions[boundary[k]]).norm())
        .collect();
    let mut phi = 0.0;
    let tangents: Vec<Vector2<f64>> = (0..nb)
        .map(|k| {
            if k > 0 {
                phi += turn[k];
            }
            Vector2::new(phi.cos(), phi.sin())
        })
        .collect();
    let closed = close_curve(&lengths, &tangents)?;

    let mut uv = vec![[0.0f64; 2]; n];
    let mut cursor = Vector2::zeros();
    for k in 0..nb {
        uv[boundary[k]] = [cursor.x, cursor.y];
        cursor += closed[k] * tangents[k];
    }
    extend_interior(&factor, &ib, &blocks, boundary, &mut uv);
    if uv.iter().flatten().any(|c| !c.is_finite()) {
        return Err(FlattenError::Solver("non-finite coordinates".into()));
    }
    if signed_area_of(&uv, tris) < 0.0 {
        for p in &mut uv {
            p[1] = -p[1];
        }
    }

    let embeds = |uv: &[Vec2]| flipped(uv, tris).is_empty() && boundary_is_simple(uv, boundary);
    if !embeds(&uv) {
        let mut repaired = uv.clone();
        if boundary_is_simple(&uv, boundary) {
            let (factor, ib) = factor_interior(&clamp_weights(&lap), &blocks)?;
            extend_interior(&factor, &ib, &blocks, boundary, &mut repaired);
            untangle(&mut repaired, tris, &blocks);
        }
        if !embeds(&repaired) {
            if let Some(mut r) = rectified(&positions, boundary) {
                if signed_area_of(&r, tris) < 0.0 {
                    for p in &mut r {
                        p[1] = -p[1];
                    }
                }
                repaired = r;
            }
        }
        if embeds(&repaired) {
            uv = repaired;
        }
    }

    let area = signed_area_of(&uv, tris);
    if !(area > 0.0) {
        return Err(FlattenError::Solver("flattened area vanished".into()));
    }
    let s = (mesh.area() / area).sqrt();
    for p in &mut uv {
        p[0] *= s;
        p[1] *= s;
    }
    Ok(FlatMesh {
        uv,
        triangles: tris.clone(),
        boundary_loop: boundary.clone(),
    })
}

fn signed_area_of(uv: &[Vec2], tris: &[[usize; 3]]) -> f64 {
    tris.iter().map(|t| 0.5 * orient(uv[t[0]], uv[t[1]], uv[t[2]])).sum()
}

/// Least change to `lengths` (weighted by `1 / length`) that closes the polygon.
pub(super) fn close_curve(lengths: &[f64], tangents: &[Vector2<f64>]) -> Result<Vec<f64>, FlattenError> {
    let mut m = Matrix2::zeros();
    let mut gap = Vector2::zeros();
    for (l, t) in lengths.iter().zip(tangents) {
        m += *l * t * t.transpose();
        gap += *l * t;
    }
    let lambda = m
        .try_inverse()
        .ok_or_else(|| FlattenError::Solver("boundary tangents span a line".into()))?
        * gap;
    Ok(lengths
        .iter()
        .zip(tangents)
        .map(|(l, t)| l - l * t.dot(&lambda))
        .collect())
}

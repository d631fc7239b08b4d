use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use crate::geometry::{orient, strictly_outside, Vec2};

use super::MeshingError;

struct Site {
    at: Point2<f64>,
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.at
    }
}

/// Delaunay triangles over `points`, each counter-clockwise in `(x, y)`.
/// Duplicate points are not referenced more than once.
pub fn triangulate(points: &[Vec2]) -> Result<Vec<[usize; 3]>, MeshingError> {
    if points.len() < 3 {
        return Err(MeshingError::TooFewPoints(points.len()));
    }
    let sites = points
        .iter()
        .enumerate()
        .map(|(id, p)| Site {
            at: Point2::new(p[0], p[1]),
            id,
        })
        .collect();
    let dt = DelaunayTriangulation::<Site>::bulk_load(sites)
        .map_err(|e| MeshingError::Triangulation(format!("{e:?}")))?;
    let mut tris: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|f| {
            let [a, b, c] = f.vertices();
            [a.data().id, b.data().id, c.data().id]
        })
        .collect();
    if tris.is_empty() {
        return Err(MeshingError::Collinear);
    }
    for t in &mut tris {
        if orient(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    Ok(tris)
}

/// Removes every triangle with an edge midpoint strictly outside `ring`.
pub fn carve_concavity(points: &[Vec2], tris: &[[usize; 3]], ring: &[Vec2]) -> Vec<[usize; 3]> {
    tris.iter()
        .copied()
        .filter(|t| {
            (0..3).all(|e| {
                let (a, b) = (points[t[e]], points[t[(e + 1) % 3]]);
                !strictly_outside(ring, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::signed_area;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Positive when `d` is inside the circumcircle of counter-clockwise `abc`.
    fn in_circle(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
        let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
        let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
        let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
        let ad = adx * adx + ady * ady;
        let bd = bdx * bdx + bdy * bdy;
        let cd = cdx * cdx + cdy * cdy;
        adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
    }

    fn assert_delaunay(points: &[Vec2], tris: &[[usize; 3]]) {
        for t in tris {
            let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
            assert!(orient(a, b, c) > 0.0);
            let scale = [a, b, c]
                .iter()
                .map(|p| p[0].abs().max(p[1].abs()))
                .fold(1.0, f64::max);
            for (i, &d) in points.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                assert!(in_circle(a, b, c, d) <= 1e-9 * scale.powi(4), "point {i} inside {t:?}");
            }
        }
    }

    #[test]
    fn three_points_one_triangle() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(triangulate(&p).unwrap().len(), 1);
    }

    #[test]
    fn convex_quad_picks_delaunay_diagonal() {
        let p = [[0.0, 0.0], [4.0, 0.0], [4.2, 1.0], [0.0, 1.0]];
        let t = triangulate(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert_delaunay(&p, &t);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(triangulate(&[[0.0, 0.0], [1.0, 1.0]]), Err(MeshingError::TooFewPoints(2))));
        let line: Vec<Vec2> = (0..5).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(triangulate(&line), Err(MeshingError::Collinear)));
    }

    #[test]
    fn thousand_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<Vec2> = (0..1000)
            .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
            .collect();
        let t = triangulate(&p).unwrap();
        assert_delaunay(&p, &t);
    }

    #[test]
    fn convex_boundary_carves_nothing() {
        let ring = [[-0.5, -0.5], [9.5, -0.5], [9.5, 9.5], [-0.5, 9.5]];
        let mut p: Vec<Vec2> = (0..100).map(|i| [(i % 10) as f64, (i / 10) as f64]).collect();
        p.extend(ring);
        let t = triangulate(&p).unwrap();
        assert_eq!(carve_concavity(&p, &t, &ring).len(), t.len());
    }

    #[test]
    fn notch_is_carved_out() {
        // C shape: a 30x30 block with a 10-wide notch cut from the right side
        let ring = [
            [0.0, 0.0],
            [30.0, 0.0],
            [30.0, 10.0],
            [10.0, 10.0],
            [10.0, 20.0],
            [30.0, 20.0],
            [30.0, 30.0],
            [0.0, 30.0],
        ];
        let mut p: Vec<Vec2> = Vec::new();
        for y in 0..=30 {
            for x in 0..=30 {
                let q = [x as f64, y as f64];
                if !strictly_outside(&ring, q) {
                    p.push(q);
                }
            }
        }
        let t = triangulate(&p).unwrap();
        let carved = carve_concavity(&p, &t, &ring);
        assert!(carved.len() < t.len());
        let area: f64 = carved
            .iter()
            .map(|t| signed_area(&[p[t[0]], p[t[1]], p[t[2]]]))
            .sum();
        let truth = signed_area(&ring);
        assert!((area - truth).abs() / truth < 0.02, "{area} vs {truth}");
        assert_eq!(carve_concavity(&p, &carved, &ring), carved);
    }

    #[test]
    fn single_triangle_survives_iff_midpoints_inside() {
        let p = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let t = triangulate(&p).unwrap();
        let big = [[-1.0, -1.0], [6.0, -1.0], [-1.0, 6.0]];
        assert_eq!(carve_concavity(&p, &t, &big).len(), 1);
        let inscribed = [[2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        assert_eq!(carve_concavity(&p, &t, &inscribed).len(), 1);
        let smaller = [[2.1, 0.1], [1.9, 1.9], [0.1, 2.1]];
        assert!(carve_concavity(&p, &t, &smaller).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_sets_are_delaunay(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(3..300);
            let p: Vec<Vec2> = (0..n)
                .map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)])
                .collect();
            if let Ok(t) = triangulate(&p) {
                assert_delaunay(&p, &t);
            }
        }
    }
}

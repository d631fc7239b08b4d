use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;

use super::{BgpcpError, PointCloud};

/// Radius-outlier parameters; a point survives with at least `min_neighbors`
/// other points within `radius` meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadiusFilter {
    pub radius: f64,
    pub min_neighbors: usize,
}

pub const DEFAULT_MIN_NEIGHBORS: usize = 5;
pub const DEFAULT_RADIUS_PITCHES: f64 = 3.0;

impl RadiusFilter {
    pub fn new(radius: f64, min_neighbors: usize) -> Result<Self, BgpcpError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(BgpcpError::InvalidRadius(radius));
        }
        if min_neighbors == 0 {
            return Err(BgpcpError::InvalidMinNeighbors);
        }
        Ok(Self {
            radius,
            min_neighbors,
        })
    }

    /// Three median pixel pitches at the cloud's depth, five neighbours.
    pub fn for_cloud(cloud: &PointCloud, fx: f64, fy: f64) -> Result<Self, BgpcpError> {
        let mut depths: Vec<f64> = cloud.points.iter().map(|p| p.position.z).collect();
        if depths.is_empty() {
            return Err(BgpcpError::NoValidPoints);
        }
        let mid = depths.len() / 2;
        let (_, median, _) = depths.select_nth_unstable_by(mid, f64::total_cmp);
        let pitch = *median / (fx * fy).sqrt();
        Self::new(DEFAULT_RADIUS_PITCHES * pitch, DEFAULT_MIN_NEIGHBORS)
    }
}

/// Uniform hash grid with cell edge = query radius.
pub struct SpatialHash<'a> {
    points: &'a [Point3<f64>],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> SpatialHash<'a> {
    pub fn new(points: &'a [Point3<f64>], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self {
            points,
            cell,
            cells,
        }
    }

    fn key(p: &Point3<f64>, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Other points within `radius` (≤ cell size) of point `i`, counting stops at `cap`.
    pub fn count_neighbors(&self, i: usize, radius: f64, cap: usize) -> usize {
        let p = &self.points[i];
        let r2 = radius * radius;
        let k = Self::key(p, self.cell);
        let mut n = 0;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(bucket) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j as usize != i && (self.points[j as usize] - p).norm_squared() <= r2 {
                            n += 1;
                            if n >= cap {
                                return n;
                            }
                        }
                    }
                }
            }
        }
        n
    }
}

fn outliers_among(cloud: &PointCloud, candidates: &[usize], f: RadiusFilter) -> Vec<usize> {
    let positions: Vec<Point3<f64>> = cloud.points.iter().map(|p| p.position).collect();
    let hash = SpatialHash::new(&positions, f.radius);
    candidates
        .par_iter()
        .copied()
        .filter(|&i| hash.count_neighbors(i, f.radius, f.min_neighbors) < f.min_neighbors)
        .collect()
}

/// Indices of in-band outliers; neighbours are counted over the whole cloud.
pub fn band_outliers(cloud: &PointCloud, f: RadiusFilter) -> Vec<usize> {
    let band: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.points[i].in_band).collect();
    if band.is_empty() {
        return Vec::new();
    }
    outliers_among(cloud, &band, f)
}

/// Indices of outliers over every point.
pub fn all_outliers(cloud: &PointCloud, f: RadiusFilter) -> Vec<usize> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    outliers_among(cloud, &all, f)
}

/// Drops in-band outliers; out-of-band points pass through untouched.
pub fn radius_filter(cloud: &PointCloud, f: RadiusFilter) -> PointCloud {
    cloud.without(&band_outliers(cloud, f))
}

/// Reference filter over the whole cloud, ignoring the band.
pub fn whole_cloud_filter(cloud: &PointCloud, f: RadiusFilter) -> PointCloud {
    cloud.without(&all_outliers(cloud, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bgpcp::CloudPoint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_cloud(n: usize, pitch: f64, band: impl Fn(usize, usize) -> bool) -> PointCloud {
        let points = (0..n * n)
            .map(|i| {
                let (x, y) = (i % n, i / n);
                CloudPoint {
                    position: Point3::new(x as f64 * pitch, y as f64 * pitch, 0.2),
                    pixel: (x, y),
                    in_band: band(x, y),
                }
            })
            .collect();
        PointCloud { points }
    }

    /// Exhaustive neighbour count.
    fn brute_outliers(cloud: &PointCloud, f: RadiusFilter, band_only: bool) -> Vec<usize> {
        let pts = &cloud.points;
        (0..pts.len())
            .filter(|&i| !band_only || pts[i].in_band)
            .filter(|&i| {
                let n = (0..pts.len())
                    .filter(|&j| j != i && (pts[j].position - pts[i].position).norm() <= f.radius)
                    .count();
                n < f.min_neighbors
            })
            .collect()
    }

    #[test]
    fn displaced_band_point_is_the_only_removal() {
        let pitch = 0.001;
        let mut cloud = grid_cloud(30, pitch, |x, _| x < 3);
        let f = RadiusFilter::new(3.0 * pitch, 5).unwrap();
        let idx = 15 * 30 + 1;
        cloud.points[idx].position.z += 10.0 * f.radius;
        assert_eq!(band_outliers(&cloud, f), vec![idx]);
        assert_eq!(brute_outliers(&cloud, f, true), vec![idx]);
        assert_eq!(radius_filter(&cloud, f).len(), 899);
    }

    #[test]
    fn empty_band_is_identity() {
        let mut cloud = grid_cloud(10, 0.001, |_, _| false);
        cloud.points[5].position.z += 1.0;
        let f = RadiusFilter::new(0.0001, 8).unwrap();
        assert_eq!(radius_filter(&cloud, f), cloud);
    }

    #[test]
    fn clean_grid_keeps_every_point() {
        // a corner point has exactly 2 neighbours within one pitch and 5 within two
        let pitch = 0.0005;
        let cloud = grid_cloud(20, pitch, |_, _| true);
        for (mult, min) in [(1.0, 2), (1.5, 3), (2.0, 5), (3.0, 5)] {
            let f = RadiusFilter::new(mult * pitch * (1.0 + 1e-9), min).unwrap();
            assert!(all_outliers(&cloud, f).is_empty(), "radius {mult} pitch, min {min}");
        }
        // interior points alone reach 8 neighbours once the diagonal is in range
        let f = RadiusFilter::new(2f64.sqrt() * pitch * (1.0 + 1e-9), 8).unwrap();
        let out = all_outliers(&cloud, f);
        assert!(out.iter().all(|&i| {
            let (x, y) = cloud.points[i].pixel;
            x == 0 || y == 0 || x == 19 || y == 19
        }));
    }

    #[test]
    fn parameters_validated() {
        assert!(RadiusFilter::new(0.0, 3).is_err());
        assert!(RadiusFilter::new(f64::NAN, 3).is_err());
        assert!(RadiusFilter::new(1.0, 0).is_err());
    }

    #[test]
    fn default_radius_is_three_pitches() {
        let cloud = grid_cloud(5, 0.001, |_, _| false);
        let f = RadiusFilter::for_cloud(&cloud, 600.0, 600.0).unwrap();
        assert!((f.radius - 3.0 * 0.2 / 600.0).abs() < 1e-15);
        assert_eq!(f.min_neighbors, 5);
    }

    pub(crate) fn random_cloud(seed: u64, n: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|i| {
                let (x, y) = (i % 40, i / 40);
                let noise = if rng.random_bool(0.1) { rng.random_range(-0.01..0.01) } else { 0.0 };
                CloudPoint {
                    position: Point3::new(
                        x as f64 * 0.001 + rng.random_range(-2e-4..2e-4),
                        y as f64 * 0.001 + rng.random_range(-2e-4..2e-4),
                        0.2 + noise,
                    ),
                    pixel: (x, y),
                    in_band: rng.random_bool(0.3),
                }
            })
            .collect();
        PointCloud { points }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn banded_matches_brute_force_and_whole_cloud(seed in any::<u64>()) {
            let cloud = random_cloud(seed, 600);
            let f = RadiusFilter::new(0.0025, 5).unwrap();
            let banded = band_outliers(&cloud, f);
            prop_assert_eq!(&banded, &brute_outliers(&cloud, f, true));
            let whole: Vec<usize> = all_outliers(&cloud, f)
                .into_iter()
                .filter(|&i| cloud.points[i].in_band)
                .collect();
            prop_assert_eq!(banded, whole);
        }
    }
}

use crate::geometry::{point_segment_distance, Vec2};
use crate::raster::{Mask, Raster};

use super::BgpcpError;

/// Exact Euclidean distance (px) from every pixel center to the nearest set
/// pixel of `sites`, by separable lower-envelope passes.
pub fn distance_transform(sites: &Mask) -> Result<Raster<f64>, BgpcpError> {
    if sites.count() == 0 {
        return Err(BgpcpError::EmptyBoundary);
    }
    let (w, h) = sites.dims();
    let mut sq = Raster::from_fn(w, h, |x, y| if *sites.get(x, y) { 0.0 } else { f64::INFINITY });

    let mut f = vec![0.0; w.max(h)];
    let mut d = vec![0.0; w.max(h)];
    let mut v = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = *sq.get(x, y);
        }
        lower_envelope(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            *sq.get_mut(x, y) = d[y];
        }
    }
    for y in 0..h {
        for x in 0..w {
            f[x] = *sq.get(x, y);
        }
        lower_envelope(&f[..w], &mut d[..w], &mut v, &mut z);
        for x in 0..w {
            *sq.get_mut(x, y) = d[x];
        }
    }
    Ok(sq.map(|s| s.sqrt()))
}

/// `d[q] = min_p (q - p)^2 + f[p]`; infinite entries are skipped.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        d.fill(f64::INFINITY);
        return;
    }
    let meet = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    let mut k = 0;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        let mut s = meet(v[k], q);
        while s <= z[k] {
            k -= 1;
            s = meet(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Pixels whose center lies within `distance` of the closed polyline `ring`.
pub fn polyline_band(ring: &[Vec2], width: usize, height: usize, distance: f64) -> Mask {
    let mut band = Raster::filled(width, height, false);
    if width == 0 || height == 0 {
        return band;
    }
    let n = ring.len();
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64 - 1.0);
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let x0 = clamp((a[0].min(b[0]) - distance).floor(), width) as usize;
        let x1 = clamp((a[0].max(b[0]) + distance).ceil(), width) as usize;
        let y0 = clamp((a[1].min(b[1]) - distance).floor(), height) as usize;
        let y1 = clamp((a[1].max(b[1]) + distance).ceil(), height) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !*band.get(x, y) && point_segment_distance([x as f64, y as f64], a, b) <= distance {
                    *band.get_mut(x, y) = true;
                }
            }
        }
    }
    band
}

/// Set pixels with at least one unset (or off-raster) 4-neighbour.
pub fn edge_pixels(mask: &Mask) -> Mask {
    Raster::from_fn(mask.width(), mask.height(), |x, y| {
        *mask.get(x, y)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| mask.get_checked(x as i64 + dx, y as i64 + dy) != Some(&true))
    })
}

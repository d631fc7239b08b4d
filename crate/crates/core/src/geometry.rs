//! Planar primitives used by the boundary, band and carving stages.

pub type Vec2 = [f64; 2];

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Twice the signed area of triangle `abc`; positive when counter-clockwise.
#[inline]
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc
}

pub fn perimeter(ring: &[Vec2]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let d = sub(ring[(i + 1) % n], ring[i]);
            d[0].hypot(d[1])
        })
        .sum()
}

/// Whether `p` lies on the closed segment `ab` (exact for dyadic coordinates).
#[inline]
pub fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    orient(a, b, p) == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Winding number of `ring` around `p` (0 outside).
pub fn winding_number(ring: &[Vec2], p: Vec2) -> i32 {
    let n = ring.len();
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Point-in-polygon; points on the ring count as inside.
pub fn contains_point(ring: &[Vec2], p: Vec2) -> bool {
    let n = ring.len();
    if (0..n).any(|i| on_segment(p, ring[i], ring[(i + 1) % n])) {
        return true;
    }
    winding_number(ring, p) != 0
}

/// Strictly-outside test matching [`contains_point`].
#[inline]
pub fn strictly_outside(ring: &[Vec2], p: Vec2) -> bool {
    !contains_point(ring, p)
}

/// Euclidean distance from `p` to segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    q[0].hypot(q[1])
}

/// Closed-segment intersection test, including collinear overlap and touching.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// First pair of non-adjacent ring edges that intersect, if any.
///
/// Adjacent edges may only share their common endpoint; overlapping adjacent
/// edges (a zero-angle spike) are reported too.
pub fn find_self_intersection(ring: &[Vec2]) -> Option<(usize, usize)> {
    let n = ring.len();
    if n < 3 {
        return None;
    }
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return Some((i, i));
        }
        // spike back along the previous edge
        let (p, _) = edge((i + n - 1) % n);
        if orient(p, a, b) == 0.0 {
            let back = sub(p, a);
            let fwd = sub(b, a);
            if back[0] * fwd[0] + back[1] * fwd[1] > 0.0 {
                return Some(((i + n - 1) % n, i));
            }
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Vec2; 4] = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];

    #[test]
    fn shoelace_orientation() {
        assert_eq!(signed_area(&SQUARE), 4.0);
        let mut cw = SQUARE;
        cw.reverse();
        assert_eq!(signed_area(&cw), -4.0);
    }

    #[test]
    fn boundary_points_count_as_inside() {
        assert!(contains_point(&SQUARE, [1.0, 1.0]));
        assert!(contains_point(&SQUARE, [2.0, 1.0]));
        assert!(contains_point(&SQUARE, [0.0, 0.0]));
        assert!(!contains_point(&SQUARE, [2.0 + 1e-12, 1.0]));
        assert!(!contains_point(&SQUARE, [-1.0, 1.0]));
    }

    #[test]
    fn point_segment_distances() {
        assert_eq!(point_segment_distance([1.0, 1.0], [0.0, 0.0], [2.0, 0.0]), 1.0);
        assert_eq!(point_segment_distance([3.0, 0.0], [0.0, 0.0], [2.0, 0.0]), 1.0);
        assert_eq!(point_segment_distance([0.0, 7.0], [0.0, 7.0], [0.0, 7.0]), 0.0);
    }

    #[test]
    fn bowtie_detected() {
        let bowtie = [[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]];
        assert!(find_self_intersection(&bowtie).is_some());
        assert!(find_self_intersection(&SQUARE).is_none());
    }

    #[test]
    fn touching_vertex_detected() {
        // figure-eight that touches itself at (1, 1)
        let ring = [
            [0.0, 0.0],
            [1.0, 1.0],
            [2.0, 0.0],
            [2.0, 2.0],
            [1.0, 1.0],
            [0.0, 2.0],
        ];
        assert!(find_self_intersection(&ring).is_some());
    }
}

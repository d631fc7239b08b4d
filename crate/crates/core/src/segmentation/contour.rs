use crate::geometry::Vec2;
use crate::raster::Mask;

use super::component::fill_holes;
use super::{BoundaryPolygon, SegmentationError};

/// Corner cut applied where the border touches itself diagonally; shifts the
/// area by `PINCH_CHAMFER^2 / 2` px² per visit.
const PINCH_CHAMFER: f64 = 1e-4;

/// Outer border of the first set pixel's 8-connected region, traced along
/// pixel edges counter-clockwise. Holes are filled first.
pub fn extract_boundary(mask: &Mask) -> Result<BoundaryPolygon, SegmentationError> {
    let filled = fill_holes(mask);
    let (start_x, start_y) = filled
        .set_pixels()
        .next()
        .ok_or(SegmentationError::EmptyMask)?;
    let fg = |x: i64, y: i64| filled.get_checked(x, y).copied().unwrap_or(false);

    // Corner (i, j) sits at pixel-space position (i - 0.5, j - 0.5). The
    // foreground pixel stays on the left of the walking direction, where
    // left of (dx, dy) is (-dy, dx).
    let start = (start_x as i64, start_y as i64);
    let start_dir = (1i64, 0i64);
    let mut corner = (start.0 + 1, start.1);
    let mut dir = start_dir;
    let mut ring: Vec<Vec2> = Vec::new();
    let pos = |c: (i64, i64)| [c.0 as f64 - 0.5, c.1 as f64 - 0.5];
    let limit = 4 * filled.len() + 8;

    for _ in 0..limit {
        let left = (-dir.1, dir.0);
        // pixel index whose center is corner + 0.5 * v, for v = (±1, ±1)
        let pixel_at = |v: (i64, i64)| (corner.0 + (v.0 - 1) / 2, corner.1 + (v.1 - 1) / 2);
        let la = pixel_at((dir.0 + left.0, dir.1 + left.1));
        let ra = pixel_at((dir.0 - left.0, dir.1 - left.1));
        let (la_fg, ra_fg) = (fg(la.0, la.1), fg(ra.0, ra.1));

        // a foreground pixel right-ahead wins even when left-ahead is background:
        // diagonal neighbours stay on one border (8-neighbourhood tracing)
        let new_dir = if ra_fg {
            (-left.0, -left.1)
        } else if !la_fg {
            left
        } else {
            dir
        };

        if new_dir != dir {
            let p = pos(corner);
            if !la_fg && ra_fg {
                // diagonal pinch: visited once from each side, chamfer both visits
                ring.push([
                    p[0] - PINCH_CHAMFER * dir.0 as f64,
                    p[1] - PINCH_CHAMFER * dir.1 as f64,
                ]);
                ring.push([
                    p[0] + PINCH_CHAMFER * new_dir.0 as f64,
                    p[1] + PINCH_CHAMFER * new_dir.1 as f64,
                ]);
            } else {
                ring.push(p);
            }
        }
        dir = new_dir;
        corner = (corner.0 + dir.0, corner.1 + dir.1);
        if corner == (start.0 + 1, start.1) && dir == start_dir {
            break;
        }
    }
    // the start corner (start.0, start.1) is always a left turn coming up the
    // pixel's left edge, so it was emitted during the walk
    BoundaryPolygon::from_traced(ring)
}

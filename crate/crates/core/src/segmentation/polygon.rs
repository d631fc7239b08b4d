use serde::{Deserialize, Serialize};

use crate::geometry::{find_self_intersection, perimeter, point_segment_distance, signed_area, Vec2};

use super::SegmentationError;

/// Douglas-Peucker tolerance for the draggable preview polygon.
pub const SIMPLIFY_TOLERANCE_PX: f64 = 1.5;

/// Closed simple polygon in pixel coordinates, counter-clockwise
/// (positive shoelace area in raw `(x, y)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct BoundaryPolygon {
    vertices: Vec<Vec2>,
}

impl BoundaryPolygon {
    /// Validates a user-drawn ring and normalizes its orientation.
    pub fn redraw(vertices: Vec<Vec2>) -> Result<Self, SegmentationError> {
        let mut vertices = vertices;
        // a trailing copy of the first vertex is a common way to close a ring
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(SegmentationError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(SegmentationError::NonFiniteVertex);
        }
        if let Some((first, second)) = find_self_intersection(&vertices) {
            return Err(SegmentationError::SelfIntersection { first, second });
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(SegmentationError::ZeroArea);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    pub(super) fn from_traced(vertices: Vec<Vec2>) -> Result<Self, SegmentationError> {
        if vertices.len() < 3 {
            return Err(SegmentationError::TooFewVertices(vertices.len()));
        }
        debug_assert!(signed_area(&vertices) > 0.0);
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Enclosed area in px².
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        perimeter(&self.vertices)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Replaces one vertex, rejecting edits that break simplicity.
    pub fn move_vertex(&self, index: usize, to: Vec2) -> Result<Self, SegmentationError> {
        let len = self.vertices.len();
        if index >= len {
            return Err(SegmentationError::VertexIndex { index, len });
        }
        let mut vertices = self.vertices.clone();
        vertices[index] = to;
        if !(to[0].is_finite() && to[1].is_finite()) {
            return Err(SegmentationError::NonFiniteVertex);
        }
        if let Some((first, second)) = find_self_intersection(&vertices) {
            return Err(SegmentationError::SelfIntersection { first, second });
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            // dragging through the ring can only flip it by creating a crossing,
            // so this is a zero-area collapse
            return Err(SegmentationError::ZeroArea);
        }
        Ok(Self { vertices })
    }

    /// Douglas-Peucker reduction of the closed ring. The result is for display
    /// and dragging only; it is not re-validated for simplicity.
    pub fn simplified(&self, tolerance: f64) -> Vec<Vec2> {
        let v = &self.vertices;
        let n = v.len();
        if n <= 4 {
            return v.clone();
        }
        // anchor on vertex 0 and the vertex farthest from it
        let far = (1..n)
            .max_by(|&a, &b| {
                let da = (v[a][0] - v[0][0]).hypot(v[a][1] - v[0][1]);
                let db = (v[b][0] - v[0][0]).hypot(v[b][1] - v[0][1]);
                da.total_cmp(&db)
            })
            .expect("n > 4");
        let mut keep = vec![false; n + 1];
        keep[0] = true;
        keep[far] = true;
        keep[n] = true;
        let at = |i: usize| v[i % n];
        let mut stack = vec![(0usize, far), (far, n)];
        while let Some((a, b)) = stack.pop() {
            if b <= a + 1 {
                continue;
            }
            let (mut best, mut best_d) = (a, -1.0);
            for i in (a + 1)..b {
                let d = point_segment_distance(at(i), at(a), at(b));
                if d > best_d {
                    best = i;
                    best_d = d;
                }
            }
            if best_d > tolerance {
                keep[best] = true;
                stack.push((a, best));
                stack.push((best, b));
            }
        }
        (0..n).filter(|&i| keep[i]).map(|i| v[i]).collect()
    }
}

impl TryFrom<Vec<Vec2>> for BoundaryPolygon {
    type Error = SegmentationError;

    fn try_from(vertices: Vec<Vec2>) -> Result<Self, Self::Error> {
        Self::redraw(vertices)
    }
}

impl From<BoundaryPolygon> for Vec<Vec2> {
    fn from(p: BoundaryPolygon) -> Self {
        p.vertices
    }
}

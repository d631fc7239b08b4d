use crate::flatten::PatchSolid;

use super::FabricateError;

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

/// One binary STL facet, millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
}

impl StlTriangle {
    /// Facet with the unit normal computed from its winding.
    pub fn from_vertices(v: [[f32; 3]; 3]) -> Self {
        let sub = |a: [f32; 3], b: [f32; 3]| [a[0] as f64 - b[0] as f64, a[1] as f64 - b[1] as f64, a[2] as f64 - b[2] as f64];
        let (e1, e2) = (sub(v[1], v[0]), sub(v[2], v[0]));
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let normal = if len > 0.0 {
            [(n[0] / len) as f32, (n[1] / len) as f32, (n[2] / len) as f32]
        } else {
            [0.0; 3]
        };
        Self { normal, vertices: v }
    }
}

/// Facets of `solid` converted from meters to millimeters.
pub fn solid_triangles(solid: &PatchSolid) -> Vec<StlTriangle> {
    solid
        .triangles
        .iter()
        .map(|t| {
            StlTriangle::from_vertices(t.map(|v| {
                let p = solid.vertices[v];
                [(p.x * 1000.0) as f32, (p.y * 1000.0) as f32, (p.z * 1000.0) as f32]
            }))
        })
        .collect()
}

pub fn encode_stl(triangles: &[StlTriangle]) -> Result<Vec<u8>, FabricateError> {
    if triangles.is_empty() {
        return Err(FabricateError::EmptySolid);
    }
    let count = u32::try_from(triangles.len()).map_err(|_| FabricateError::TooManyTriangles(triangles.len()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + RECORD_LEN * triangles.len());
    out.extend_from_slice(&[0u8; HEADER_LEN]);
    out.extend_from_slice(&count.to_le_bytes());
    for t in triangles {
        for c in t.normal {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in t.vertices {
            for c in v {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

/// Binary STL of `solid` in millimeters.
pub fn write_stl(solid: &PatchSolid) -> Result<Vec<u8>, FabricateError> {
    encode_stl(&solid_triangles(solid))
}

pub fn parse_stl(bytes: &[u8]) -> Result<Vec<StlTriangle>, FabricateError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(FabricateError::MalformedStl(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().expect("4 bytes")) as usize;
    let expected = HEADER_LEN + 4 + RECORD_LEN * count;
    if bytes.len() != expected {
        return Err(FabricateError::MalformedStl(format!(
            "{count} triangles need {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
    Ok((0..count)
        .map(|i| {
            let base = HEADER_LEN + 4 + RECORD_LEN * i;
            let v = |k: usize| [f(base + 12 * k), f(base + 12 * k + 4), f(base + 12 * k + 8)];
            StlTriangle {
                normal: v(0),
                vertices: [v(1), v(2), v(3)],
            }
        })
        .collect())
}

/// Signed volume of a closed facet set, mm³.
pub fn stl_volume(triangles: &[StlTriangle]) -> f64 {
    triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.vertices.map(|v| v.map(|x| x as f64));
            (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                + a[2] * (b[0] * c[1] - b[1] * c[0]))
                / 6.0
        })
        .sum()
}

/// Axis-aligned cube `[0, s]^3` as 12 outward facets.
pub fn cube_triangles(s: f32) -> Vec<StlTriangle> {
    let p = |i: usize| {
        [
            if i & 1 != 0 { s } else { 0.0 },
            if i & 2 != 0 { s } else { 0.0 },
            if i & 4 != 0 { s } else { 0.0 },
        ]
    };
    const QUADS: [[usize; 4]; 6] = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    QUADS
        .iter()
        .flat_map(|q| {
            [
                StlTriangle::from_vertices([p(q[0]), p(q[1]), p(q[2])]),
                StlTriangle::from_vertices([p(q[0]), p(q[2]), p(q[3])]),
            ]
        })
        .collect()
}

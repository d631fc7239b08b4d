use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use geo::{Area, BooleanOps, Buffer, Coord, LineString, MultiLineString, MultiPolygon, Polygon};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flatten::PatchSolid;
use crate::geometry::{contains_point, signed_area, Vec2};

use super::gcode::{Command, GcodeProgram, Move};
use super::FabricateError;

/// Planar slicer settings, millimeters and mm/min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicerConfig {
    pub layer_height: f64,
    pub extrusion_width: f64,
    pub filament_diameter: f64,
    pub perimeter_count: u32,
    pub infill_spacing: f64,
    pub feed_rate: f64,
}

impl Default for SlicerConfig {
    fn default() -> Self {
        Self {
            layer_height: 0.2,
            extrusion_width: 0.4,
            filament_diameter: 1.75,
            perimeter_count: 2,
            infill_spacing: 0.4,
            feed_rate: 1200.0,
        }
    }
}

impl SlicerConfig {
    pub fn validate(&self) -> Result<(), FabricateError> {
        let positive = [
            ("layer_height", self.layer_height),
            ("extrusion_width", self.extrusion_width),
            ("filament_diameter", self.filament_diameter),
            ("infill_spacing", self.infill_spacing),
            ("feed_rate", self.feed_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FabricateError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.perimeter_count == 0 {
            return Err(FabricateError::Config("perimeter_count must be at least 1".into()));
        }
        if self.layer_height > self.extrusion_width {
            return Err(FabricateError::Config(format!(
                "layer_height {} exceeds extrusion_width {}",
                self.layer_height, self.extrusion_width
            )));
        }
        Ok(())
    }

    /// Filament length per mm of bead.
    pub fn extrusion_per_mm(&self) -> f64 {
        let r = 0.5 * self.filament_diameter;
        self.extrusion_width * self.layer_height / (std::f64::consts::PI * r * r)
    }

    pub fn filament_area(&self) -> f64 {
        let r = 0.5 * self.filament_diameter;
        std::f64::consts::PI * r * r
    }
}

/// Toolpaths of one layer, millimeters.
#[derive(Debug, Clone)]
pub struct Layer {
    pub z: f64,
    pub region: MultiPolygon<f64>,
    /// Closed loops, first point not repeated.
    pub perimeters: Vec<Vec<Vec2>>,
    /// Open polylines in print order.
    pub infill: Vec<Vec<Vec2>>,
}

/// Closed outlines of `solid` (mm) cut at height `z`; outer loops counter-clockwise.
pub fn cross_section(vertices: &[[f64; 3]], tris: &[[usize; 3]], z: f64) -> Result<Vec<Vec<Vec2>>, FabricateError> {
    // edge crossing -> (next edge crossing, point)
    let mut next: HashMap<(usize, usize), ((usize, usize), Vec2)> = HashMap::new();
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    for t in tris {
        let p = t.map(|v| vertices[v]);
        let above = p.map(|q| q[2] > z);
        if above.iter().all(|&a| a) || above.iter().all(|&a| !a) {
            continue;
        }
        let mut hits: Vec<((usize, usize), Vec2)> = Vec::with_capacity(2);
        for e in 0..3 {
            let (i, j) = (e, (e + 1) % 3);
            if above[i] != above[j] {
                let s = (z - p[i][2]) / (p[j][2] - p[i][2]);
                hits.push((
                    key(t[i], t[j]),
                    [p[i][0] + s * (p[j][0] - p[i][0]), p[i][1] + s * (p[j][1] - p[i][1])],
                ));
            }
        }
        let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
        let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
        let n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2]];
        // walk along z x n so the solid stays on the left
        let dir = [-n[1], n[0]];
        let (a, b) = (hits[0], hits[1]);
        let along = (b.1[0] - a.1[0]) * dir[0] + (b.1[1] - a.1[1]) * dir[1];
        let (from, to) = if along >= 0.0 { (a, b) } else { (b, a) };
        if next.insert(from.0, (to.0, from.1)).is_some() {
            return Err(FabricateError::OpenContour { z });
        }
    }
    let mut starts: Vec<(usize, usize)> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if used.contains(&s) {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = s;
        loop {
            if !used.insert(cur) {
                return Err(FabricateError::OpenContour { z });
            }
            let &(to, p) = next.get(&cur).ok_or(FabricateError::OpenContour { z })?;
            ring.push(p);
            cur = to;
            if cur == s {
                break;
            }
        }
        loops.push(ring);
    }
    Ok(loops)
}

fn to_line_string(ring: &[Vec2]) -> LineString<f64> {
    let mut coords: Vec<Coord<f64>> = ring.iter().map(|p| Coord { x: p[0], y: p[1] }).collect();
    coords.push(coords[0]);
    LineString::new(coords)
}

/// Nests counter-clockwise outer loops with the clockwise holes they contain.
pub fn loops_to_region(loops: &[Vec<Vec2>]) -> MultiPolygon<f64> {
    let (outer, holes): (Vec<&Vec<Vec2>>, Vec<&Vec<Vec2>>) = loops.iter().partition(|l| signed_area(l) > 0.0);
    let mut polys: Vec<(LineString<f64>, Vec<LineString<f64>>)> =
        outer.iter().map(|o| (to_line_string(o), Vec::new())).collect();
    for h in holes {
        if let Some(k) = outer.iter().position(|o| contains_point(o, h[0])) {
            polys[k].1.push(to_line_string(h));
        }
    }
    MultiPolygon::new(polys.into_iter().map(|(e, i)| Polygon::new(e, i)).collect())
}

fn rings_of(region: &MultiPolygon<f64>) -> Vec<Vec<Vec2>> {
    let mut out = Vec::new();
    for p in &region.0 {
        for ls in std::iter::once(p.exterior()).chain(p.interiors()) {
            let mut pts: Vec<Vec2> = ls.0.iter().map(|c| [c.x, c.y]).collect();
            if pts.len() > 1 && pts.first() == pts.last() {
                pts.pop();
            }
            if pts.len() >= 3 {
                out.push(pts);
            }
        }
    }
    out
}

/// 45° lines on a fixed global grid clipped to `region`, alternating direction.
pub fn infill_lines(region: &MultiPolygon<f64>, spacing: f64) -> Vec<Vec<Vec2>> {
    if region.0.is_empty() {
        return Vec::new();
    }
    let u = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    let nrm = [-FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    let (mut smin, mut smax, mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &region.0 {
        for c in &p.exterior().0 {
            let s = c.x * nrm[0] + c.y * nrm[1];
            let t = c.x * u[0] + c.y * u[1];
            smin = smin.min(s);
            smax = smax.max(s);
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
    }
    let (j0, j1) = ((smin / spacing - 0.5).floor() as i64, (smax / spacing - 0.5).ceil() as i64);
    let mut out = Vec::new();
    for j in j0..=j1 {
        let s = (j as f64 + 0.5) * spacing;
        let at = |t: f64| Coord {
            x: s * nrm[0] + t * u[0],
            y: s * nrm[1] + t * u[1],
        };
        let line = MultiLineString::new(vec![LineString::new(vec![at(tmin - 1.0), at(tmax + 1.0)])]);
        let clipped = region.clip(&line, false);
        let mut pieces: Vec<[Vec2; 2]> = clipped
            .0
            .iter()
            .filter(|ls| ls.0.len() >= 2)
            .map(|ls| {
                let (a, b) = (ls.0[0], ls.0[ls.0.len() - 1]);
                let ta = a.x * u[0] + a.y * u[1];
                let tb = b.x * u[0] + b.y * u[1];
                if ta <= tb {
                    [[a.x, a.y], [b.x, b.y]]
                } else {
                    [[b.x, b.y], [a.x, a.y]]
                }
            })
            .filter(|[a, b]| (b[0] - a[0]).hypot(b[1] - a[1]) > 1e-9)
            .collect();
        pieces.sort_by(|p, q| {
            let tp = p[0][0] * u[0] + p[0][1] * u[1];
            let tq = q[0][0] * u[0] + q[0][1] * u[1];
            tp.total_cmp(&tq)
        });
        if j.rem_euclid(2) == 1 {
            pieces.reverse();
            for p in &mut pieces {
                p.swap(0, 1);
            }
        }
        out.extend(pieces.into_iter().map(|p| p.to_vec()));
    }
    out
}

fn solid_mm(solid: &PatchSolid) -> Vec<[f64; 3]> {
    solid
        .vertices
        .iter()
        .map(|p| [p.x * 1000.0, p.y * 1000.0, p.z * 1000.0])
        .collect()
}

/// Layer heights `(i + 0.5) * h` strictly below the solid's top, mm.
pub fn layer_heights(thickness_mm: f64, h: f64) -> Vec<f64> {
    (0..)
        .map(|i| (i as f64 + 0.5) * h)
        .take_while(|&z| z < thickness_mm)
        .collect()
}

/// Cross-sections, perimeters and infill for every layer.
pub fn plan_layers(solid: &PatchSolid, cfg: &SlicerConfig) -> Result<Vec<Layer>, FabricateError> {
    cfg.validate()?;
    let verts = solid_mm(solid);
    let (zmin, zmax) = verts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[2]), hi.max(v[2])));
    let height = zmax - zmin;
    if !(height >= cfg.layer_height) {
        return Err(FabricateError::TooThin {
            thickness: height,
            layer_height: cfg.layer_height,
        });
    }
    let w = cfg.extrusion_width;
    layer_heights(height, cfg.layer_height)
        .into_par_iter()
        .map(|dz| {
            let z = zmin + dz;
            let loops = cross_section(&verts, &solid.triangles, z)?;
            let region = loops_to_region(&loops);
            let mut perimeters = Vec::new();
            for k in 0..cfg.perimeter_count {
                let inset = region.buffer(-(0.5 * w + k as f64 * w));
                perimeters.extend(rings_of(&inset));
            }
            let core = region.buffer(-(cfg.perimeter_count as f64 * w));
            let infill = if core.unsigned_area() > 0.0 {
                infill_lines(&core, cfg.infill_spacing)
            } else {
                Vec::new()
            };
            Ok(Layer {
                z: dz,
                region,
                perimeters,
                infill,
            })
        })
        .collect()
}

fn path_length(points: &[Vec2], closed: bool) -> f64 {
    let n = points.len();
    let segs = if closed { n } else { n.saturating_sub(1) };
    (0..segs)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum()
}

/// Total bead length of a layer, mm.
pub fn layer_path_length(layer: &Layer) -> f64 {
    layer.perimeters.iter().map(|p| path_length(p, true)).sum::<f64>()
        + layer.infill.iter().map(|p| path_length(p, false)).sum::<f64>()
}

/// G-code for `solid`: per layer a `G92 E0`, perimeters outermost first, then infill.
pub fn slice(solid: &PatchSolid, cfg: &SlicerConfig) -> Result<GcodeProgram, FabricateError> {
    let layers = plan_layers(solid, cfg)?;
    let per_mm = cfg.extrusion_per_mm();
    let mut cmds = vec![
        Command::Comment(" woundpatch planar slicer".into()),
        Command::Comment(format!(
            " layer_height={} extrusion_width={} filament_diameter={} perimeters={} infill_spacing={}",
            cfg.layer_height, cfg.extrusion_width, cfg.filament_diameter, cfg.perimeter_count, cfg.infill_spacing
        )),
        Command::Comment(format!(" layers={}", layers.len())),
    ];
    for (i, layer) in layers.iter().enumerate() {
        cmds.push(Command::Comment(format!("LAYER:{i}")));
        cmds.push(Command::ResetExtruder(0.0));
        cmds.push(Command::Travel(Move::z(layer.z)));
        let mut e = 0.0;
        let mut emit = |pts: &[Vec2], closed: bool, cmds: &mut Vec<Command>| {
            cmds.push(Command::Travel(Move::xy(pts[0][0], pts[0][1])));
            let n = pts.len();
            let steps = if closed { n } else { n - 1 };
            for s in 1..=steps {
                let (a, b) = (pts[s - 1], pts[s % n]);
                e += (b[0] - a[0]).hypot(b[1] - a[1]) * per_mm;
                let mut m = Move::xy(b[0], b[1]).with_e(e);
                if s == 1 {
                    m = m.with_f(cfg.feed_rate);
                }
                cmds.push(Command::Extrude(m));
            }
        };
        for p in &layer.perimeters {
            emit(p, true, &mut cmds);
        }
        for p in &layer.infill {
            emit(p, false, &mut cmds);
        }
    }
    cmds.push(Command::Comment(" end".into()));
    Ok(GcodeProgram { commands: cmds })
}

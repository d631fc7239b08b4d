use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::capture::{CaptureBundle, DepthMap, Intrinsics, RgbImage, ScoreMap};
use crate::raster::{Mask, Raster};

use super::noise::{depth_noise, NoiseModel};
use super::EvalError;

/// Synthetic wound geometry on the skin plane `z = 0`, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WoundShape {
    /// Flat disk.
    Disk { radius: f64 },
    /// Elliptical paraboloid depression of the given depth.
    Crater { a: f64, b: f64, depth: f64 },
    /// Spherical cap raised `height` above the plane.
    Cap { base_radius: f64, height: f64 },
}

impl WoundShape {
    /// Whether world point `(x, y)` lies inside the rim.
    pub fn inside(&self, x: f64, y: f64) -> bool {
        match *self {
            WoundShape::Disk { radius } => x * x + y * y <= radius * radius,
            WoundShape::Crater { a, b, .. } => (x / a).powi(2) + (y / b).powi(2) <= 1.0,
            WoundShape::Cap { base_radius, .. } => x * x + y * y <= base_radius * base_radius,
        }
    }

    /// Surface height above the skin plane.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        if !self.inside(x, y) {
            return 0.0;
        }
        match *self {
            WoundShape::Disk { .. } => 0.0,
            WoundShape::Crater { a, b, depth } => -depth * (1.0 - (x / a).powi(2) - (y / b).powi(2)),
            WoundShape::Cap { base_radius, height } => {
                let r = sphere_radius(base_radius, height);
                (r * r - x * x - y * y).sqrt() - (r - height)
            }
        }
    }

    /// Rim points, `n` samples counter-clockwise.
    pub fn rim(&self, n: usize) -> Vec<Point3<f64>> {
        let (a, b) = match *self {
            WoundShape::Disk { radius } => (radius, radius),
            WoundShape::Crater { a, b, .. } => (a, b),
            WoundShape::Cap { base_radius, .. } => (base_radius, base_radius),
        };
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                Point3::new(a * t.cos(), b * t.sin(), 0.0)
            })
            .collect()
    }

    /// Exact surface area where a closed form exists, else fine quadrature, m².
    pub fn truth_area(&self) -> f64 {
        match *self {
            WoundShape::Disk { radius } => PI * radius * radius,
            WoundShape::Cap { base_radius, height } => PI * (base_radius * base_radius + height * height),
            WoundShape::Crater { .. } => self.quadrature_area(1024),
        }
    }

    /// Midpoint quadrature of `sqrt(1 + |grad h|²)` in elliptic polar coordinates.
    pub fn quadrature_area(&self, n: usize) -> f64 {
        let (a, b) = match *self {
            WoundShape::Disk { radius } => (radius, radius),
            WoundShape::Crater { a, b, .. } => (a, b),
            WoundShape::Cap { base_radius, .. } => (base_radius, base_radius),
        };
        let grad2 = |x: f64, y: f64| -> f64 {
            match *self {
                WoundShape::Disk { .. } => 0.0,
                WoundShape::Crater { a, b, depth } => {
                    let gx = 2.0 * depth * x / (a * a);
                    let gy = 2.0 * depth * y / (b * b);
                    gx * gx + gy * gy
                }
                WoundShape::Cap { base_radius, height } => {
                    let r = sphere_radius(base_radius, height);
                    let q = x * x + y * y;
                    q / (r * r - q)
                }
            }
        };
        // rho = s^2 clusters samples toward the rim where the cap's slope peaks
        let mut total = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let rho = s * s;
            let jac = 2.0 * s / n as f64;
            for j in 0..n {
                let phi = 2.0 * PI * (j as f64 + 0.5) / n as f64;
                let (x, y) = (a * rho * phi.cos(), b * rho * phi.sin());
                total += (1.0 + grad2(x, y)).sqrt() * a * b * rho * jac * (2.0 * PI / n as f64);
            }
        }
        total
    }

    /// First hit of the ray `o + t d` with the surface (skin plane outside the rim).
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        if d.z >= 0.0 {
            return None;
        }
        let t_plane = -o.z / d.z;
        let at = |t: f64| o + d * t;
        match *self {
            WoundShape::Disk { .. } => Some(t_plane),
            WoundShape::Crater { a, b, depth } => {
                let p = at(t_plane);
                if !self.inside(p.x, p.y) {
                    return Some(t_plane);
                }
                let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
                let qa = -depth * (d.x * d.x * ia + d.y * d.y * ib);
                let qb = d.z - 2.0 * depth * (o.x * d.x * ia + o.y * d.y * ib);
                let qc = o.z + depth - depth * (o.x * o.x * ia + o.y * o.y * ib);
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 || qa == 0.0 {
                    return Some(t_plane);
                }
                Some((-qb - disc.sqrt()) / (2.0 * qa))
            }
            WoundShape::Cap { base_radius, height } => {
                let r = sphere_radius(base_radius, height);
                let center = Vector3::new(0.0, 0.0, height - r);
                let oc = o.coords - center;
                let qa = d.dot(d);
                let qb = 2.0 * oc.dot(d);
                let qc = oc.dot(&oc) - r * r;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc >= 0.0 {
                    let t = (-qb - disc.sqrt()) / (2.0 * qa);
                    if t > 0.0 && at(t).z >= 0.0 {
                        return Some(t);
                    }
                }
                Some(t_plane)
            }
        }
    }
}

fn sphere_radius(base: f64, height: f64) -> f64 {
    (base * base + height * height) / (2.0 * height)
}

/// Wound types of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WoundType {
    A,
    B,
    C,
}

impl WoundType {
    pub const ALL: [WoundType; 3] = [WoundType::A, WoundType::B, WoundType::C];

    pub fn shape(self) -> WoundShape {
        match self {
            WoundType::A => WoundShape::Disk { radius: 0.0225 },
            WoundType::B => WoundShape::Crater {
                a: 0.026,
                b: 0.019,
                depth: 0.004,
            },
            WoundType::C => WoundShape::Cap {
                base_radius: 0.022,
                height: 0.0044,
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WoundType::A => "A",
            WoundType::B => "B",
            WoundType::C => "C",
        }
    }
}

/// Looking at the wound center from `distance` meters, tilted about the world x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub distance: f64,
    pub tilt_deg: f64,
}

impl CameraPose {
    pub fn center(&self) -> Point3<f64> {
        let t = self.tilt_deg.to_radians();
        Point3::new(0.0, -self.distance * t.sin(), self.distance * t.cos())
    }

    /// Camera x, y, z (optical) axes in world coordinates.
    pub fn axes(&self) -> [Vector3<f64>; 3] {
        let t = self.tilt_deg.to_radians();
        [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, -t.cos(), -t.sin()),
            Vector3::new(0.0, t.sin(), -t.cos()),
        ]
    }

    /// World point in the camera frame.
    pub fn to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        let v = p - self.center();
        let [x, y, z] = self.axes();
        Point3::new(v.dot(&x), v.dot(&y), v.dot(&z))
    }

    /// World direction of the ray through pixel `(u, v)`, unit optical-axis component.
    pub fn ray(&self, k: &Intrinsics, u: f64, v: f64) -> Vector3<f64> {
        let [x, y, z] = self.axes();
        x * ((u - k.cx) / k.fx) + y * ((v - k.cy) / k.fy) + z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub shape: WoundShape,
    pub pose: CameraPose,
    pub noise: NoiseModel,
    /// Integer image translation of the whole scene, px.
    pub shift_px: (i64, i64),
    pub noise_seed: u64,
}

impl SyntheticScene {
    pub fn new(shape: WoundShape, tilt_deg: f64, noise: NoiseModel, noise_seed: u64) -> Self {
        Self {
            shape,
            pose: CameraPose {
                distance: 0.2,
                tilt_deg,
            },
            noise,
            shift_px: (0, 0),
            noise_seed,
        }
    }

    pub fn truth_area_cm2(&self) -> f64 {
        self.shape.truth_area() * 1e4
    }
}

/// 640 x 480 depth camera, 600 px focal length.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).expect("valid intrinsics")
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub bundle: CaptureBundle,
    /// Depth before noise, meters.
    pub clean_depth: Raster<f64>,
    /// Projection of the wound center.
    pub seed: (i64, i64),
}

const SUPERSAMPLE: usize = 4;
const MAX_TILT_DEG: f64 = 30.0;

fn gaussian_blur(r: &Raster<f32>, sigma: f64) -> Raster<f32> {
    let rad = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-rad..=rad).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = r.dims();
    let pass = |src: &Raster<f32>, dx: i64, dy: i64| {
        Raster::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (k, wgt) in kernel.iter().enumerate() {
                let o = k as i64 - rad;
                let sx = (x as i64 + o * dx).clamp(0, w as i64 - 1) as usize;
                let sy = (y as i64 + o * dy).clamp(0, h as i64 - 1) as usize;
                acc += wgt * *src.get(sx, sy) as f64;
            }
            (acc / norm) as f32
        })
    };
    pass(&pass(r, 1, 0), 0, 1)
}

/// Ray-cast depth with noise, a blurred ground-truth score map and the wound-center seed.
pub fn render_depth(scene: &SyntheticScene, k: &Intrinsics) -> Result<Rendered, EvalError> {
    if !(scene.pose.tilt_deg.abs() <= MAX_TILT_DEG) {
        return Err(EvalError::TiltOutOfRange(scene.pose.tilt_deg));
    }
    let mut k = *k;
    k.cx += scene.shift_px.0 as f64;
    k.cy += scene.shift_px.1 as f64;
    k.validate().map_err(|e| EvalError::Capture(e.to_string()))?;
    let (w, h) = (k.width, k.height);
    let pose = scene.pose;
    let o = pose.center();

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in scene.shape.rim(256) {
        let c = pose.to_camera(&p);
        let (u, v) = k.project(&c);
        lo = [lo[0].min(u), lo[1].min(v)];
        hi = [hi[0].max(u), hi[1].max(v)];
    }
    let margin = 4.0;
    if lo[0] < margin || lo[1] < margin || hi[0] > w as f64 - 1.0 - margin || hi[1] > h as f64 - 1.0 - margin {
        return Err(EvalError::OutOfFrustum);
    }

    let hit = |u: f64, v: f64| -> Option<(f64, Point3<f64>)> {
        let d = pose.ray(&k, u, v);
        scene.shape.intersect(&o, &d).map(|t| (t, o + d * t))
    };
    let clean = Raster::from_fn(w, h, |x, y| hit(x as f64, y as f64).map_or(0.0, |(t, _)| t));

    let (bx0, by0) = ((lo[0] - margin).floor() as usize, (lo[1] - margin).floor() as usize);
    let (bx1, by1) = ((hi[0] + margin).ceil() as usize, (hi[1] + margin).ceil() as usize);
    let coverage = Raster::from_fn(w, h, |x, y| {
        if x < bx0 || x > bx1 || y < by0 || y > by1 {
            return 0.0f32;
        }
        let mut n = 0;
        for i in 0..SUPERSAMPLE {
            for j in 0..SUPERSAMPLE {
                let du = (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                let dv = (j as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                if let Some((_, p)) = hit(x as f64 + du, y as f64 + dv) {
                    if scene.shape.inside(p.x, p.y) {
                        n += 1;
                    }
                }
            }
        }
        n as f32 / (SUPERSAMPLE * SUPERSAMPLE) as f32
    });
    let score = gaussian_blur(&coverage, 1.0);

    let wound: Mask = coverage.map(|&c| c >= 0.5);
    let noise = depth_noise(&scene.noise, &wound, scene.shift_px, scene.noise_seed);
    let depth = Raster::from_fn(w, h, |x, y| {
        let z = *clean.get(x, y);
        if z > 0.0 {
            (z + *noise.get(x, y) * 1e-3).max(1e-6)
        } else {
            0.0
        }
    });

    let rgb_data: Vec<u8> = coverage
        .as_slice()
        .iter()
        .flat_map(|&c| {
            let c = c as f64;
            [
                (224.0 * (1.0 - c) + 150.0 * c) as u8,
                (180.0 * (1.0 - c) + 40.0 * c) as u8,
                (160.0 * (1.0 - c) + 50.0 * c) as u8,
            ]
        })
        .collect();
    let rgb = RgbImage::new(w, h, rgb_data).map_err(|e| EvalError::Capture(e.to_string()))?;
    let depth = DepthMap::from_raster(depth).map_err(|e| EvalError::Capture(e.to_string()))?;
    let score = ScoreMap::from_raster(score).map_err(|e| EvalError::Capture(e.to_string()))?;
    let bundle = CaptureBundle::new(rgb, depth, k, Some(score), 0.5).map_err(|e| EvalError::Capture(e.to_string()))?;

    let (su, sv) = k.project(&pose.to_camera(&Point3::origin()));
    Ok(Rendered {
        bundle,
        clean_depth: clean,
        seed: (su.round() as i64, sv.round() as i64),
    })
}

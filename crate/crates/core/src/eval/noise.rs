use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bgpcp::polyline_band;
use crate::segmentation::extract_boundary;
use crate::raster::{Mask, Raster};

/// Depth noise: a unit-variance Gaussian field with Gaussian correlation,
/// scaled to `sigma_mm`; within `rim_px` of the wound rim an independent
/// white component raises the standard deviation to `rim_amplification * sigma_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub sigma_mm: f64,
    pub rim_amplification: f64,
    /// Smoothing kernel standard deviation, px; 0 gives white noise.
    pub correlation_px: f64,
    pub rim_px: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_mm: 1.0,
            rim_amplification: 3.0,
            correlation_px: DEFAULT_CORRELATION_PX,
            rim_px: 2.0,
        }
    }
}

pub const DEFAULT_CORRELATION_PX: f64 = 20.0;

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            sigma_mm: 0.0,
            rim_amplification: 1.0,
            ..Self::default()
        }
    }
}

/// Largest image translation (px) under which the noise follows the wound.
pub const MAX_SHIFT_PX: i64 = 32;

/// Unit-variance field sampled at `(x - shift.0, y - shift.1)` of a canvas
/// that does not depend on the shift.
pub fn correlated_field(width: usize, height: usize, corr_px: f64, shift: (i64, i64), rng: &mut impl Rng) -> Raster<f64> {
    let rad = if corr_px > 0.0 { (3.0 * corr_px).ceil() as usize } else { 0 };
    let pad = MAX_SHIFT_PX as usize + rad;
    let (cw, ch) = (width + 2 * pad, height + 2 * pad);
    let white: Vec<f64> = (0..cw * ch).map(|_| rng.sample(StandardNormal)).collect();
    let canvas = Raster::from_vec(cw, ch, white).expect("sized canvas");
    let smooth = if rad == 0 {
        canvas
    } else {
        let kernel: Vec<f64> = (0..=2 * rad)
            .map(|i| {
                let o = i as f64 - rad as f64;
                (-o * o / (2.0 * corr_px * corr_px)).exp()
            })
            .collect();
        // separable kernel k (x) k; white input gives variance (sum k^2)^2
        let scale = 1.0 / kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
        let horizontal = Raster::from_fn(cw - 2 * rad, ch, |x, y| {
            kernel.iter().enumerate().map(|(i, k)| k * canvas.get(x + i, y)).sum::<f64>() * scale
        });
        Raster::from_fn(cw - 2 * rad, ch - 2 * rad, |x, y| {
            kernel.iter().enumerate().map(|(i, k)| k * horizontal.get(x, y + i)).sum::<f64>() * scale
        })
    };
    let off = MAX_SHIFT_PX;
    Raster::from_fn(width, height, |x, y| {
        let sx = (x as i64 - shift.0 + off).clamp(0, smooth.width() as i64 - 1) as usize;
        let sy = (y as i64 - shift.1 + off).clamp(0, smooth.height() as i64 - 1) as usize;
        *smooth.get(sx, sy)
    })
}

/// Pixels whose center lies within `radius` px of the traced rim of `mask`.
pub fn rim_zone(mask: &Mask, radius: f64) -> Mask {
    let (w, h) = mask.dims();
    match extract_boundary(mask) {
        Ok(b) => polyline_band(b.vertices(), w, h, radius),
        Err(_) => Raster::filled(w, h, false),
    }
}

/// Depth noise in mm for a raster whose wound region is `wound`.
pub fn depth_noise(model: &NoiseModel, wound: &Mask, shift: (i64, i64), seed: u64) -> Raster<f64> {
    let (w, h) = wound.dims();
    if model.sigma_mm == 0.0 {
        return Raster::filled(w, h, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = correlated_field(w, h, model.correlation_px, shift, &mut rng);
    let extra = (model.rim_amplification * model.rim_amplification - 1.0).max(0.0).sqrt();
    if extra == 0.0 {
        return field.map(|&c| model.sigma_mm * c);
    }
    // the rim component is drawn on the same shift-independent canvas
    let white = correlated_field(w, h, 0.0, shift, &mut rng);
    let rim = rim_zone(wound, model.rim_px);
    Raster::from_fn(w, h, |x, y| {
        let c = *field.get(x, y);
        let n = if *rim.get(x, y) { c + extra * white.get(x, y) } else { c };
        model.sigma_mm * n
    })
}

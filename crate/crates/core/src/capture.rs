//! Capture bundles: one RGB-D frame, its camera intrinsics and an optional
//! segmentation score raster.
//!
//! On disk a bundle is a directory holding `manifest.json`, `rgb.png`
//! (8-bit RGB), `depth.png` (16-bit grayscale, millimeters, 0 = hole) and an
//! optional header-less `score.f32` (little-endian `f32`, row-major). In
//! memory depth is stored in meters.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_RGB_FILE: &str = "rgb.png";
const DEFAULT_DEPTH_FILE: &str = "depth.png";
const DEFAULT_SCORE_FILE: &str = "score.f32";

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("image decode failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("invalid depth value {value} at pixel ({x}, {y})")]
    InvalidDepth { x: usize, y: usize, value: f64 },
    #[error("invalid score value {value} at index {index}")]
    InvalidScore { index: usize, value: f32 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("depth must be positive for back-projection, got {0}")]
    NonPositiveDepth(f64),
}

/// Pinhole camera intrinsics for the depth raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CaptureError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(CaptureError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CaptureError::InvalidIntrinsics(
                "raster size must be positive".into(),
            ));
        }
        let cx_ok = self.cx >= 0.0 && self.cx < self.width as f64;
        let cy_ok = self.cy >= 0.0 && self.cy < self.height as f64;
        if !(cx_ok && cy_ok) {
            return Err(CaptureError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Camera-frame point for pixel `(px, py)` at `depth` meters along the optical axis.
    pub fn back_project(&self, px: f64, py: f64, depth: f64) -> Result<Point3<f64>, CaptureError> {
        back_project(px, py, depth, self)
    }

    /// Pixel coordinates of a camera-frame point (`z > 0`).
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

pub fn back_project(px: f64, py: f64, depth: f64, k: &Intrinsics) -> Result<Point3<f64>, CaptureError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(CaptureError::NonPositiveDepth(depth));
    }
    Ok(Point3::new(
        (px - k.cx) * depth / k.fx,
        (py - k.cy) * depth / k.fy,
        depth,
    ))
}

/// Metric depth raster; 0 marks a hole.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(Raster<f64>);

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, CaptureError> {
        let found = values.len();
        let raster = Raster::from_vec(width, height, values).ok_or_else(|| {
            CaptureError::DimensionMismatch {
                what: "depth raster",
                expected: format!("{} values", width * height),
                found: format!("{found} values"),
            }
        })?;
        Self::from_raster(raster)
    }

    pub fn from_raster(raster: Raster<f64>) -> Result<Self, CaptureError> {
        let w = raster.width();
        if let Some((i, &v)) = raster
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(CaptureError::InvalidDepth {
                x: i % w,
                y: i / w,
                value: v,
            });
        }
        Ok(Self(raster))
    }

    pub fn raster(&self) -> &Raster<f64> {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Depth in meters, `None` for holes.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        let d = *self.0.get(x, y);
        (d > 0.0).then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&d| d > 0.0).count()
    }
}

/// 8-bit RGB raster at native camera resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, CaptureError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(CaptureError::DimensionMismatch {
                what: "rgb raster",
                expected: format!("{} bytes", width * height * 3),
                found: format!("{} bytes", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn solid(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }
}

/// Per-pixel wound probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap(Raster<f32>);

impl ScoreMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, CaptureError> {
        let found = values.len();
        let raster = Raster::from_vec(width, height, values).ok_or_else(|| {
            CaptureError::DimensionMismatch {
                what: "score raster",
                expected: format!("{} values", width * height),
                found: format!("{found} values"),
            }
        })?;
        Self::from_raster(raster)
    }

    pub fn from_raster(raster: Raster<f32>) -> Result<Self, CaptureError> {
        if let Some((index, &value)) = raster
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(CaptureError::InvalidScore { index, value });
        }
        Ok(Self(raster))
    }

    pub fn raster(&self) -> &Raster<f32> {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        *self.0.get(x, y)
    }

    /// Bilinear resample to `width x height`, sampling at pixel centers.
    pub fn resample(&self, width: usize, height: usize) -> ScoreMap {
        if (width, height) == self.0.dims() {
            return self.clone();
        }
        let (sw, sh) = self.0.dims();
        let sx = sw as f64 / width as f64;
        let sy = sh as f64 / height as f64;
        let out = Raster::from_fn(width, height, |x, y| {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
            let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
            let s = |x: usize, y: usize| *self.0.get(x, y) as f64;
            let top = s(x0, y0) * (1.0 - tx) + s(x1, y0) * tx;
            let bottom = s(x0, y1) * (1.0 - tx) + s(x1, y1) * tx;
            ((top * (1.0 - ty) + bottom * ty) as f32).clamp(0.0, 1.0)
        });
        ScoreMap(out)
    }
}

/// The pipeline input: one frame plus intrinsics and optional scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureBundle {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
    pub score: Option<ScoreMap>,
    pub default_threshold: f64,
}

impl CaptureBundle {
    pub fn new(
        rgb: RgbImage,
        depth: DepthMap,
        intrinsics: Intrinsics,
        score: Option<ScoreMap>,
        default_threshold: f64,
    ) -> Result<Self, CaptureError> {
        let bundle = Self {
            rgb,
            depth,
            intrinsics,
            score,
            default_threshold,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        self.intrinsics.validate()?;
        let depth_dims = (self.depth.width(), self.depth.height());
        let k_dims = (self.intrinsics.width, self.intrinsics.height);
        if depth_dims != k_dims {
            return Err(CaptureError::DimensionMismatch {
                what: "depth raster vs intrinsics",
                expected: format!("{}x{}", k_dims.0, k_dims.1),
                found: format!("{}x{}", depth_dims.0, depth_dims.1),
            });
        }
        if let Some(score) = &self.score {
            let s_dims = (score.width(), score.height());
            if s_dims != depth_dims {
                return Err(CaptureError::DimensionMismatch {
                    what: "score raster vs depth",
                    expected: format!("{}x{}", depth_dims.0, depth_dims.1),
                    found: format!("{}x{}", s_dims.0, s_dims.1),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.default_threshold) {
            return Err(CaptureError::Manifest(format!(
                "default_threshold {} outside [0, 1]",
                self.default_threshold
            )));
        }
        Ok(())
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub depth_unit: String,
    pub default_threshold: f64,
    #[serde(default = "default_rgb_file")]
    pub rgb_file: String,
    #[serde(default = "default_depth_file")]
    pub depth_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_file: Option<String>,
    /// Score raster size when it differs from the depth raster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_height: Option<usize>,
}

fn default_rgb_file() -> String {
    DEFAULT_RGB_FILE.into()
}

fn default_depth_file() -> String {
    DEFAULT_DEPTH_FILE.into()
}

impl Manifest {
    pub fn parse(bytes: &[u8]) -> Result<Self, CaptureError> {
        let m: Manifest =
            serde_json::from_slice(bytes).map_err(|e| CaptureError::Manifest(e.to_string()))?;
        if m.depth_unit != "mm" {
            return Err(CaptureError::Manifest(format!(
                "unsupported depth_unit {:?} (expected \"mm\")",
                m.depth_unit
            )));
        }
        Ok(m)
    }

    fn intrinsics(&self) -> Result<Intrinsics, CaptureError> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

/// Raw file contents of a bundle, as read from disk or received over the wire.
#[derive(Debug, Clone, Default)]
pub struct BundleParts {
    pub manifest: Vec<u8>,
    pub rgb_png: Vec<u8>,
    pub depth_png: Vec<u8>,
    pub score_f32: Option<Vec<u8>>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, CaptureError> {
    fs::read(path).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a bundle directory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<CaptureBundle, CaptureError> {
    let dir = dir.as_ref();
    let manifest_bytes = read_file(&dir.join(MANIFEST_FILE))?;
    let manifest = Manifest::parse(&manifest_bytes)?;
    let parts = BundleParts {
        rgb_png: read_file(&dir.join(&manifest.rgb_file))?,
        depth_png: read_file(&dir.join(&manifest.depth_file))?,
        score_f32: match &manifest.score_file {
            Some(name) => Some(read_file(&dir.join(name))?),
            None => None,
        },
        manifest: manifest_bytes,
    };
    decode_bundle(&parts)
}

/// Decodes a bundle from in-memory file contents.
pub fn decode_bundle(parts: &BundleParts) -> Result<CaptureBundle, CaptureError> {
    let manifest = Manifest::parse(&parts.manifest)?;
    let intrinsics = manifest.intrinsics()?;

    let rgb = image::load_from_memory_with_format(&parts.rgb_png, ImageFormat::Png)?.to_rgb8();
    let rgb = RgbImage::new(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())?;

    let depth_img =
        image::load_from_memory_with_format(&parts.depth_png, ImageFormat::Png)?.to_luma16();
    let (dw, dh) = (depth_img.width() as usize, depth_img.height() as usize);
    if (dw, dh) != (manifest.width, manifest.height) {
        return Err(CaptureError::DimensionMismatch {
            what: "depth.png vs manifest",
            expected: format!("{}x{}", manifest.width, manifest.height),
            found: format!("{dw}x{dh}"),
        });
    }
    let depth = DepthMap::new(
        dw,
        dh,
        depth_img.into_raw().into_iter().map(|mm| mm as f64 / 1000.0).collect(),
    )?;

    let score = match &parts.score_f32 {
        None => None,
        Some(bytes) => {
            let sw = manifest.score_width.unwrap_or(manifest.width);
            let sh = manifest.score_height.unwrap_or(manifest.height);
            if bytes.len() != sw * sh * 4 {
                return Err(CaptureError::DimensionMismatch {
                    what: "score.f32 vs manifest",
                    expected: format!("{} values ({sw}x{sh})", sw * sh),
                    found: format!("{} bytes", bytes.len()),
                });
            }
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let map = ScoreMap::new(sw, sh, values)?;
            Some(map.resample(manifest.width, manifest.height))
        }
    };

    CaptureBundle::new(rgb, depth, intrinsics, score, manifest.default_threshold)
}

/// Encodes a bundle into file contents. Depth is rounded to whole millimeters.
pub fn encode_bundle(bundle: &CaptureBundle) -> Result<BundleParts, CaptureError> {
    let k = &bundle.intrinsics;
    let manifest = Manifest {
        fx: k.fx,
        fy: k.fy,
        cx: k.cx,
        cy: k.cy,
        width: k.width,
        height: k.height,
        depth_unit: "mm".into(),
        default_threshold: bundle.default_threshold,
        rgb_file: DEFAULT_RGB_FILE.into(),
        depth_file: DEFAULT_DEPTH_FILE.into(),
        score_file: bundle.score.as_ref().map(|_| DEFAULT_SCORE_FILE.into()),
        score_width: None,
        score_height: None,
    };
    let manifest = serde_json::to_vec_pretty(&manifest).map_err(|e| CaptureError::Manifest(e.to_string()))?;

    let rgb: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(
        bundle.rgb.width as u32,
        bundle.rgb.height as u32,
        bundle.rgb.data.clone(),
    )
    .expect("rgb buffer length validated at construction");
    let mut rgb_png = Vec::new();
    rgb.write_to(&mut Cursor::new(&mut rgb_png), ImageFormat::Png)?;

    let mm: Vec<u16> = bundle
        .depth
        .raster()
        .as_slice()
        .iter()
        .map(|&d| (d * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    let depth: ImageBuffer<Luma<u16>, _> =
        ImageBuffer::from_raw(k.width as u32, k.height as u32, mm).expect("depth dims validated");
    let mut depth_png = Vec::new();
    depth.write_to(&mut Cursor::new(&mut depth_png), ImageFormat::Png)?;

    let score_f32 = bundle.score.as_ref().map(|s| {
        s.raster()
            .as_slice()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    });

    Ok(BundleParts {
        manifest,
        rgb_png,
        depth_png,
        score_f32,
    })
}

/// Writes a bundle directory (created if missing).
pub fn save_bundle(bundle: &CaptureBundle, dir: impl AsRef<Path>) -> Result<(), CaptureError> {
    let dir = dir.as_ref();
    let io = |path: PathBuf| move |source| CaptureError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let parts = encode_bundle(bundle)?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io(path))
    };
    write(MANIFEST_FILE, &parts.manifest)?;
    write(DEFAULT_RGB_FILE, &parts.rgb_png)?;
    write(DEFAULT_DEPTH_FILE, &parts.depth_png)?;
    if let Some(score) = &parts.score_f32 {
        write(DEFAULT_SCORE_FILE, score)?;
    }
    Ok(())
}

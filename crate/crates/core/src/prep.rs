//! Training-set preparation calculators.
//!
//! Pure, seeded operations for the five preprocessing stages: shorter-edge
//! resize, per-patient balancing, bleeding oversampling, offline
//! augmentation descriptors and per-iteration patch sampling. Nothing here
//! touches pixels; callers apply the returned plans to their own images.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Mask;

/// Clamp used for per-patient balancing unless overridden.
pub const DEFAULT_CLAMP: u32 = 20;
/// Target shorter edge of the resize stage.
pub const RESIZE_SHORTER_EDGE: u32 = 800;

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("unknown patient {0:?}")]
    UnknownPatient(String),
    #[error("patient {0:?} has zero images")]
    EmptyPatient(String),
    #[error("mask has no wound pixels")]
    WoundAbsent,
    #[error("mask has no background pixels")]
    BackgroundAbsent,
    #[error("mask is empty")]
    EmptyMask,
    #[error("patch size {patch} exceeds image {width}x{height}")]
    PatchTooLarge { patch: usize, width: usize, height: usize },
    #[error("census line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Image counts per patient together with the balancing clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientCensus {
    counts: BTreeMap<String, u32>,
    clamp: u32,
    max_count: u32,
}

impl PatientCensus {
    pub fn new(counts: BTreeMap<String, u32>, clamp: u32) -> Result<Self, PrepError> {
        if let Some((id, _)) = counts.iter().find(|(_, &n)| n == 0) {
            return Err(PrepError::EmptyPatient(id.clone()));
        }
        let max_count = counts.values().copied().max().unwrap_or(0);
        Ok(Self {
            counts,
            clamp,
            max_count,
        })
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn clamp(&self) -> u32 {
        self.clamp
    }

    /// Largest image count held by a single patient.
    pub fn max_count(&self) -> u32 {
        self.max_count
    }

    /// Reads `patient_id,count` rows; a header row is skipped when its count
    /// column is not numeric.
    pub fn read_csv(reader: impl BufRead, clamp: u32) -> Result<Self, PrepError> {
        let mut counts = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PrepError::Csv {
                line: i + 1,
                message,
            };
            let (id, count) = line
                .split_once(',')
                .ok_or_else(|| err("expected patient_id,count".into()))?;
            let count = count.trim();
            match count.parse::<u32>() {
                Ok(n) => {
                    if counts.insert(id.trim().to_string(), n).is_some() {
                        return Err(err(format!("duplicate patient {:?}", id.trim())));
                    }
                }
                Err(_) if i == 0 => continue,
                Err(e) => return Err(err(format!("bad count {count:?}: {e}"))),
            }
        }
        Self::new(counts, clamp)
    }
}

/// Number of extra images to draw for `patient`: `max(min(C, N_M) - N_t, 0)`.
pub fn oversample_count(census: &PatientCensus, patient: &str) -> Result<u32, PrepError> {
    let n_t = *census
        .counts
        .get(patient)
        .ok_or_else(|| PrepError::UnknownPatient(patient.to_string()))?;
    Ok(census.clamp.min(census.max_count).saturating_sub(n_t))
}

/// Balancing plan for every patient, in patient-id order.
pub fn oversample_plan(census: &PatientCensus) -> Vec<(String, u32)> {
    census
        .counts
        .keys()
        .map(|id| {
            let n = oversample_count(census, id).expect("id comes from the census");
            (id.clone(), n)
        })
        .collect()
}

pub fn write_plan_csv(plan: &[(String, u32)], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "patient_id,oversample")?;
    for (id, n) in plan {
        writeln!(out, "{id},{n}")?;
    }
    Ok(())
}

/// Source-image indices to duplicate for one patient, drawn with replacement.
pub fn oversample_draws(n_images: u32, extra: u32, seed: u64) -> Vec<u32> {
    if n_images == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..extra).map(|_| rng.random_range(0..n_images)).collect()
}

/// Extra bleeding-image copies for a per-class multiplier (1.0 adds none).
pub fn bleeding_oversample_count(n_bleeding: u32, multiplier: f64) -> u32 {
    if !(multiplier > 1.0) {
        return 0;
    }
    ((multiplier - 1.0) * n_bleeding as f64).round() as u32
}

/// Scales `width x height` so the shorter edge equals `target`, rounding the
/// longer edge half-up.
pub fn resize_shorter_edge(width: u32, height: u32, target: u32) -> (u32, u32) {
    let scale_long = |long: u32, short: u32| -> u32 {
        // round-half-up of long * target / short in integer arithmetic
        ((2 * long as u64 * target as u64 + short as u64) / (2 * short as u64)) as u32
    };
    if width <= height {
        (target, scale_long(height, width))
    } else {
        (scale_long(width, height), target)
    }
}

/// Random geometric transform applied to oversampled images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    /// Degrees in `[30, 330]`.
    pub rotation: f64,
    /// Off-diagonal shear terms in `[-0.25, 0.25]`.
    pub shear_x: f64,
    pub shear_y: f64,
    /// Isotropic scale in `[0.5, 2]`.
    pub scale: f64,
}

impl AugmentationParams {
    pub const ROTATION: (f64, f64) = (30.0, 330.0);
    pub const SHEAR: (f64, f64) = (-0.25, 0.25);
    pub const SCALE: (f64, f64) = (0.5, 2.0);

    pub fn is_valid(&self) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        within(self.rotation, Self::ROTATION)
            && within(self.shear_x, Self::SHEAR)
            && within(self.shear_y, Self::SHEAR)
            && within(self.scale, Self::SCALE)
    }

    pub fn sample(rng: &mut impl Rng) -> Self {
        let mut uniform = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        Self {
            rotation: uniform(Self::ROTATION),
            shear_x: uniform(Self::SHEAR),
            shear_y: uniform(Self::SHEAR),
            scale: uniform(Self::SCALE),
        }
    }
}

pub fn sample_augmentation(seed: u64) -> AugmentationParams {
    AugmentationParams::sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// The offline augmentation techniques, each producing one extra image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    GaussianNoise,
    Blur,
    ChannelSwap,
    Luminance,
    Flip,
    Rotate,
    Scale,
    Shear,
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::GaussianNoise,
        Technique::Blur,
        Technique::ChannelSwap,
        Technique::Luminance,
        Technique::Flip,
        Technique::Rotate,
        Technique::Scale,
        Technique::Shear,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantDescriptor {
    pub image: usize,
    pub technique: Technique,
    /// Per-variant seed for the pixel-level randomness of the technique.
    pub seed: u64,
}

/// Eight augmentation descriptors per image, one per technique.
pub fn stage4_variants(image_count: usize, seed: u64) -> Vec<VariantDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..image_count)
        .flat_map(|image| Technique::ALL.iter().map(move |&t| (image, t)))
        .map(|(image, technique)| VariantDescriptor {
            image,
            technique,
            seed: rng.random(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSampleSpec {
    pub patch_size: usize,
    pub wound_samples: usize,
    pub background_samples: usize,
}

impl Default for PatchSampleSpec {
    fn default() -> Self {
        Self {
            patch_size: 256,
            wound_samples: 2,
            background_samples: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchCenter {
    /// Pixel the patch was drawn for.
    pub pixel: (usize, usize),
    /// Window center after shifting the window inside the image.
    pub center: (usize, usize),
    pub wound: bool,
}

impl PatchCenter {
    /// Top-left corner of the `size x size` window centered at `center`.
    pub fn window_origin(&self, size: usize) -> (usize, usize) {
        (self.center.0 - size / 2, self.center.1 - size / 2)
    }
}

/// Draws patch centers from wound and background pixels (with replacement),
/// shifting each window so it lies within the image.
pub fn sample_patches(
    mask: &Mask,
    spec: &PatchSampleSpec,
    seed: u64,
) -> Result<Vec<PatchCenter>, PrepError> {
    if mask.is_empty() {
        return Err(PrepError::EmptyMask);
    }
    let (w, h) = mask.dims();
    if spec.patch_size > w || spec.patch_size > h {
        return Err(PrepError::PatchTooLarge {
            patch: spec.patch_size,
            width: w,
            height: h,
        });
    }
    let wound: Vec<(usize, usize)> = mask.set_pixels().collect();
    if wound.is_empty() {
        return Err(PrepError::WoundAbsent);
    }
    let background: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| !*mask.get(x, y))
        .collect();
    if background.is_empty() {
        return Err(PrepError::BackgroundAbsent);
    }

    let half = spec.patch_size / 2;
    // window [c - half, c - half + size) must fit in [0, len)
    let clamp = |c: usize, len: usize| c.clamp(half, len - spec.patch_size + half);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |pool: &[(usize, usize)], n: usize, is_wound: bool| -> Vec<PatchCenter> {
        (0..n)
            .map(|_| {
                let &(x, y) = pool.choose(&mut rng).expect("pool is nonempty");
                PatchCenter {
                    pixel: (x, y),
                    center: (clamp(x, w), clamp(y, h)),
                    wound: is_wound,
                }
            })
            .collect()
    };
    let mut out = draw(&wound, spec.wound_samples, true);
    out.extend(draw(&background, spec.background_samples, false));
    Ok(out)
}

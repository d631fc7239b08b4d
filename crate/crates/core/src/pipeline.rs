//! Stage composition: score map to boundary, boundary to surface, surface to patch.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::bgpcp::{build_band, radius_filter, BgpcpError, PointCloud, RadiusFilter};
use crate::capture::{CaptureBundle, ScoreMap};
use crate::fabricate::{fabricate, Artifacts, FabricateError, SlicerConfig};
use crate::flatten::{extrude, flatten, FlatMesh, FlattenError, PatchSolid};
use crate::geometry::Vec2;
use crate::meshing::{build_surface, MeshingError, SurfaceMesh};
use crate::raster::Mask;
use crate::segmentation::{extract_boundary, fill_holes, select_component, BoundaryPolygon, SegmentationError, Threshold};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("bundle has no score map")]
    MissingScore,
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Bgpcp(#[from] BgpcpError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error(transparent)]
    Fabricate(#[from] FabricateError),
    #[error("cancelled")]
    Cancelled,
}

fn snake(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

fn variant_name<T: std::fmt::Debug>(v: &T) -> String {
    let s = format!("{v:?}");
    let end = s.find(|c: char| !c.is_alphanumeric()).unwrap_or(s.len());
    snake(&s[..end])
}

impl PipelineError {
    /// Name of the stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::MissingScore => "capture",
            PipelineError::Segmentation(_) => "segmentation",
            PipelineError::Bgpcp(_) => "bgpcp",
            PipelineError::Meshing(_) => "meshing",
            PipelineError::Flatten(_) => "flatten",
            PipelineError::Fabricate(_) => "fabricate",
            PipelineError::Cancelled => "generate",
        }
    }

    /// Stable snake_case error code, e.g. `seed_below_threshold`.
    pub fn code(&self) -> String {
        match self {
            PipelineError::MissingScore => "missing_score".into(),
            PipelineError::Segmentation(e) => variant_name(e),
            PipelineError::Bgpcp(e) => variant_name(e),
            PipelineError::Meshing(e) => variant_name(e),
            PipelineError::Flatten(e) => variant_name(e),
            PipelineError::Fabricate(e) => variant_name(e),
            PipelineError::Cancelled => "cancelled".into(),
        }
    }
}

/// Cooperative cancellation flag checked between stages.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }

    fn check(&self) -> Result<(), PipelineError> {
        if self.is_cancelled() {
            Err(PipelineError::Cancelled)
        } else {
            Ok(())
        }
    }
}

/// Region and traced boundary for one seed and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Preview {
    /// Selected component with holes filled.
    pub mask: Mask,
    pub boundary: BoundaryPolygon,
}

pub fn preview(score: &ScoreMap, seed: (i64, i64), t: Threshold) -> Result<Preview, PipelineError> {
    let mask = fill_holes(&select_component(score, seed, t)?);
    let boundary = extract_boundary(&mask)?;
    Ok(Preview { mask, boundary })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub cloud_points: usize,
    pub band_points: usize,
    pub removed_points: usize,
    pub mesh: SurfaceMesh,
}

/// Back-projects the region, filters the band and triangulates the surface.
pub fn reconstruct(
    bundle: &CaptureBundle,
    boundary: &BoundaryPolygon,
    seed: Option<Vec2>,
    cancel: &CancelToken,
) -> Result<Reconstruction, PipelineError> {
    let k = &bundle.intrinsics;
    let band = build_band(boundary, k.width, k.height);
    let cloud = PointCloud::from_boundary(&bundle.depth, k, boundary, &band)?;
    cancel.check()?;
    let filter = RadiusFilter::for_cloud(&cloud, k.fx, k.fy)?;
    let kept = radius_filter(&cloud, filter);
    cancel.check()?;
    let mesh = build_surface(&kept, boundary, k, seed)?;
    Ok(Reconstruction {
        cloud_points: cloud.len(),
        band_points: cloud.band_count(),
        removed_points: cloud.len() - kept.len(),
        mesh,
    })
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub mesh: SurfaceMesh,
    pub flat: FlatMesh,
    pub solid: PatchSolid,
    pub artifacts: Artifacts,
}

impl Patch {
    pub fn mesh_area_cm2(&self) -> f64 {
        self.mesh.area() * 1e4
    }

    pub fn flat_area_cm2(&self) -> f64 {
        self.flat.signed_area() * 1e4
    }
}

/// Full run from a confirmed boundary to STL and G-code.
pub fn generate_patch(
    bundle: &CaptureBundle,
    boundary: &BoundaryPolygon,
    seed: Option<Vec2>,
    thickness_mm: f64,
    slicer: &SlicerConfig,
    cancel: &CancelToken,
) -> Result<Patch, PipelineError> {
    if !(thickness_mm > 0.0 && thickness_mm.is_finite()) {
        return Err(FlattenError::InvalidThickness(thickness_mm).into());
    }
    slicer.validate()?;
    let rec = reconstruct(bundle, boundary, seed, cancel)?;
    cancel.check()?;
    let flat = flatten(&rec.mesh)?;
    let solid = extrude(&flat, thickness_mm * 1e-3)?;
    cancel.check()?;
    let artifacts = fabricate(&solid, slicer)?;
    cancel.check()?;
    Ok(Patch {
        mesh: rec.mesh,
        flat,
        solid,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_snake_case() {
        let e = PipelineError::from(SegmentationError::SeedBelowThreshold {
            score: 0.1,
            threshold: 0.5,
        });
        assert_eq!(e.stage(), "segmentation");
        assert_eq!(e.code(), "seed_below_threshold");
        assert_eq!(PipelineError::from(MeshingError::EmptyMesh).code(), "empty_mesh");
        assert_eq!(PipelineError::from(FabricateError::Config("x".into())).code(), "config");
    }

    #[test]
    fn cancel_is_shared() {
        let t = CancelToken::new();
        let u = t.clone();
        assert!(t.check().is_ok());
        u.cancel();
        assert_eq!(t.check(), Err(PipelineError::Cancelled));
    }
}

use std::sync::Arc;

use axum::http::StatusCode;
use serde::{Deserialize, Serialize};
use woundpatch::capture::CaptureBundle;
use woundpatch::fabricate::SlicerConfig;
use woundpatch::geometry::Vec2;
use woundpatch::pipeline::{self, PipelineError};
use woundpatch::segmentation::{BoundaryPolygon, MaskRle, Threshold, SIMPLIFY_TOLERANCE_PX};

use crate::error::ApiError;
use crate::wire::{ArtifactManifest, BoundaryAccepted, Preview, SeedRequest, SessionSummary};

/// Generated outputs and the inputs they were built from.
#[derive(Debug, Clone)]
pub struct CachedArtifacts {
    pub key: String,
    pub stl: Arc<Vec<u8>>,
    pub gcode: Arc<String>,
    pub flat_area_cm2: f64,
    pub mesh_area_cm2: f64,
}

impl CachedArtifacts {
    pub fn manifest(&self, cached: bool) -> ArtifactManifest {
        ArtifactManifest {
            stl_bytes: self.stl.len(),
            gcode_bytes: self.gcode.len(),
            flat_area_cm2: self.flat_area_cm2,
            mesh_area_cm2: self.mesh_area_cm2,
            cached,
        }
    }
}

/// Edits that survive a restart; artifacts are regenerated on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedState {
    pub seed: Option<(i64, i64)>,
    pub threshold: Threshold,
    pub boundary: Option<BoundaryPolygon>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub bundle: Arc<CaptureBundle>,
    pub seed: Option<(i64, i64)>,
    pub threshold: Threshold,
    pub boundary: Option<BoundaryPolygon>,
    pub artifacts: Option<CachedArtifacts>,
}

fn missing_score() -> ApiError {
    PipelineError::MissingScore.into()
}

impl Session {
    pub fn new(id: String, bundle: CaptureBundle) -> Result<Self, ApiError> {
        let threshold = Threshold::new(bundle.default_threshold).map_err(ApiError::from)?;
        Ok(Self {
            id,
            bundle: Arc::new(bundle),
            seed: None,
            threshold,
            boundary: None,
            artifacts: None,
        })
    }

    pub fn restore(id: String, bundle: CaptureBundle, state: PersistedState) -> Self {
        Self {
            id,
            bundle: Arc::new(bundle),
            seed: state.seed,
            threshold: state.threshold,
            boundary: state.boundary,
            artifacts: None,
        }
    }

    pub fn persisted(&self) -> PersistedState {
        PersistedState {
            seed: self.seed,
            threshold: self.threshold,
            boundary: self.boundary.clone(),
        }
    }

    fn preview_at(&self, seed: (i64, i64), t: Threshold) -> Result<(Preview, BoundaryPolygon), ApiError> {
        let score = self.bundle.score.as_ref().ok_or_else(missing_score)?;
        let p = pipeline::preview(score, seed, t)?;
        let wire = Preview {
            threshold: t.value(),
            seed: SeedRequest { x: seed.0, y: seed.1 },
            polygon: p.boundary.simplified(SIMPLIFY_TOLERANCE_PX),
            area_px: p.boundary.area(),
            mask: MaskRle::encode(&p.mask),
        };
        Ok((wire, p.boundary))
    }

    fn commit(&mut self, seed: (i64, i64), t: Threshold, boundary: BoundaryPolygon) {
        self.seed = Some(seed);
        self.threshold = t;
        self.boundary = Some(boundary);
        self.artifacts = None;
    }

    /// Selects the region under `seed` at the current threshold. State is unchanged on error.
    pub fn set_seed(&mut self, seed: (i64, i64)) -> Result<Preview, ApiError> {
        let (wire, b) = self.preview_at(seed, self.threshold)?;
        self.commit(seed, self.threshold, b);
        Ok(wire)
    }

    pub fn set_threshold(&mut self, value: f64) -> Result<Preview, ApiError> {
        let t = Threshold::new(value).map_err(ApiError::from)?;
        let seed = self
            .seed
            .ok_or_else(|| ApiError::conflict("no_seed", "set a seed before adjusting the threshold"))?;
        let (wire, b) = self.preview_at(seed, t)?;
        self.commit(seed, t, b);
        Ok(wire)
    }

    /// Replaces the boundary with a redrawn or edited polygon.
    pub fn put_boundary(&mut self, vertices: Vec<Vec2>) -> Result<BoundaryAccepted, ApiError> {
        let b = BoundaryPolygon::redraw(vertices).map_err(ApiError::from)?;
        let k = &self.bundle.intrinsics;
        let (lo, hi) = b.bounds();
        let inside = |v: f64, n: usize| v >= -0.5 && v <= n as f64 - 0.5;
        if !(inside(lo[0], k.width) && inside(hi[0], k.width) && inside(lo[1], k.height) && inside(hi[1], k.height)) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "segmentation",
                "outside_raster",
                format!("boundary leaves the {}x{} raster", k.width, k.height),
            ));
        }
        let accepted = BoundaryAccepted {
            vertices: b.vertices().to_vec(),
            area_px: b.area(),
            perimeter_px: b.perimeter(),
        };
        self.boundary = Some(b);
        self.artifacts = None;
        Ok(accepted)
    }

    /// Identity of a generate request against the current edits.
    pub fn cache_key(&self, thickness_mm: f64, slicer: &SlicerConfig) -> String {
        serde_json::json!({
            "boundary": self.boundary,
            "seed": self.seed,
            "threshold": self.threshold,
            "thickness_mm": thickness_mm,
            "slicer": slicer,
        })
        .to_string()
    }

    /// Seed handed to meshing when it lies inside the boundary.
    pub fn mesh_seed(&self) -> Option<Vec2> {
        let b = self.boundary.as_ref()?;
        let s = self.seed?;
        let p = [s.0 as f64, s.1 as f64];
        woundpatch::geometry::contains_point(b.vertices(), p).then_some(p)
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            seed: self.seed.map(|(x, y)| SeedRequest { x, y }),
            threshold: self.threshold.value(),
            boundary: self.boundary.as_ref().map(|b| b.vertices().to_vec()),
            artifacts: self.artifacts.as_ref().map(|a| a.manifest(true)),
        }
    }
}

//! JSON bodies exchanged with the editor.

use serde::{Deserialize, Serialize};
use woundpatch::fabricate::SlicerConfig;
use woundpatch::geometry::Vec2;
use woundpatch::segmentation::MaskRle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub default_threshold: f64,
    pub has_score: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRequest {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRequest {
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryRequest {
    pub vertices: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub thickness_mm: f64,
    #[serde(default)]
    pub slicer: SlicerConfig,
}

/// Region selected by a seed and threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub threshold: f64,
    pub seed: SeedRequest,
    /// Simplified boundary for dragging, pixel coordinates, counter-clockwise.
    pub polygon: Vec<Vec2>,
    pub area_px: f64,
    /// Full region for the overlay.
    pub mask: MaskRle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAccepted {
    pub vertices: Vec<Vec2>,
    pub area_px: f64,
    pub perimeter_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub stl_bytes: usize,
    pub gcode_bytes: usize,
    pub flat_area_cm2: f64,
    pub mesh_area_cm2: f64,
    /// Served from the session cache without rerunning the pipeline.
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub seed: Option<SeedRequest>,
    pub threshold: f64,
    pub boundary: Option<Vec<Vec2>>,
    pub artifacts: Option<ArtifactManifest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub stage: String,
    pub code: String,
    pub message: String,
}

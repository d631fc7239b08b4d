//! Synthetic accuracy experiment: parametric wounds seen by a tilted depth
//! camera, measured by the reconstruction pipeline against analytic areas.

pub mod noise;
pub mod scene;
pub mod sweep;

pub use noise::{NoiseModel, DEFAULT_CORRELATION_PX};
pub use scene::{default_intrinsics, render_depth, CameraPose, Rendered, SyntheticScene, WoundShape, WoundType};
pub use sweep::{run_sweep, AccuracyReport, CellResult, SweepConfig};

use thiserror::Error;

use crate::capture::CaptureBundle;
use crate::pipeline::{preview, reconstruct, CancelToken, PipelineError};
use crate::segmentation::Threshold;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("tilt {0}° outside ±30°")]
    TiltOutOfRange(f64),
    #[error("wound is not fully inside the camera frustum")]
    OutOfFrustum,
    #[error("rendered capture invalid: {0}")]
    Capture(String),
}

/// Segments from `seed`, reconstructs and returns the 3D surface area, cm².
pub fn measure_area(bundle: &CaptureBundle, seed: (i64, i64), threshold: f64) -> Result<f64, PipelineError> {
    let score = bundle.score.as_ref().ok_or(PipelineError::MissingScore)?;
    let t = Threshold::new(threshold)?;
    let p = preview(score, seed, t)?;
    let rec = reconstruct(bundle, &p.boundary, Some([seed.0 as f64, seed.1 as f64]), &CancelToken::new())?;
    Ok(rec.mesh.area() * 1e4)
}

use crate::capture::ScoreMap;
use crate::raster::Raster;

use super::SegmentationError;

/// Per-branch score and attention logits from a multi-field-of-view head.
#[derive(Debug, Clone)]
pub struct AttentionStack {
    score_logits: Vec<Raster<f32>>,
    attention_logits: Vec<Raster<f32>>,
}

impl AttentionStack {
    pub fn new(
        score_logits: Vec<Raster<f32>>,
        attention_logits: Vec<Raster<f32>>,
    ) -> Result<Self, SegmentationError> {
        if score_logits.is_empty() {
            return Err(SegmentationError::NoBranches);
        }
        if score_logits.len() != attention_logits.len() {
            return Err(SegmentationError::DimensionMismatch(format!(
                "{} score branches vs {} attention branches",
                score_logits.len(),
                attention_logits.len()
            )));
        }
        let dims = score_logits[0].dims();
        for (branch, r) in score_logits.iter().chain(&attention_logits).enumerate() {
            if r.dims() != dims {
                return Err(SegmentationError::DimensionMismatch(format!(
                    "branch raster {:?} vs {:?}",
                    r.dims(),
                    dims
                )));
            }
            if r.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(SegmentationError::NonFinite {
                    branch: branch % score_logits.len(),
                });
            }
        }
        Ok(Self {
            score_logits,
            attention_logits,
        })
    }

    pub fn branches(&self) -> usize {
        self.score_logits.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.score_logits[0].dims()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax over branch attention logits weighting the per-branch sigmoid scores.
pub fn fuse_attention(stack: &AttentionStack) -> ScoreMap {
    let (w, h) = stack.dims();
    let k = stack.branches();
    let mut weights = vec![0.0f64; k];
    let fused = Raster::from_fn(w, h, |x, y| {
        let max = stack
            .attention_logits
            .iter()
            .map(|a| *a.get(x, y) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut norm = 0.0;
        for (wi, a) in weights.iter_mut().zip(&stack.attention_logits) {
            *wi = (*a.get(x, y) as f64 - max).exp();
            norm += *wi;
        }
        let s: f64 = weights
            .iter()
            .zip(&stack.score_logits)
            .map(|(wi, s)| wi * sigmoid(*s.get(x, y) as f64))
            .sum();
        ((s / norm) as f32).clamp(0.0, 1.0)
    });
    ScoreMap::from_raster(fused).expect("fused scores are in [0, 1]")
}

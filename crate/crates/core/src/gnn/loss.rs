use crate::error::{Result, WiceError};
use crate::linalg::{cosine, norm};

/// `1 − cos(pred, target)`, in `[0, 2]`.
pub fn cosine_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(WiceError::DimensionMismatch { expected: target.len(), found: pred.len() });
    }
    if norm(pred) == 0.0 || norm(target) == 0.0 {
        return Err(WiceError::ZeroVector);
    }
    if !pred.iter().chain(target).all(|x| x.is_finite()) {
        return Err(WiceError::NonFiniteVector);
    }
    Ok((1.0 - cosine(pred, target)).clamp(0.0, 2.0))
}

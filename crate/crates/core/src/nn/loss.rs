//! Binary cross entropy over probability planes.

use super::Tensor;
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]` before the logs.
pub const BCE_CLAMP: f64 = 1e-7;

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// Mean over all entries of −[y·ln(ŷ) + (1−y)·ln(1−ŷ)].
///
/// For a `[N, E]` batch this matches a 1/E normalization per row followed by
/// the mean over rows.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "bce: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut acc = 0.0;
    for (&p, &y) in pred.data().iter().zip(target.data()) {
        let p = clamp(p);
        acc -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(acc / n)
}

/// Gradient of [`bce_loss`] w.r.t. the predictions, evaluated at the clamped
/// probabilities.
pub fn bce_backward(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape("bce backward: shape mismatch".into()));
    }
    let n = pred.len() as f64;
    let mut grad = pred.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(target.data()) {
        let p = clamp(*g);
        *g = (-y / p + (1.0 - y) / (1.0 - p)) / n;
    }
    Ok(grad)
}

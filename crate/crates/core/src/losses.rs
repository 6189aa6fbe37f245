//! Training objectives, evaluable at inference time for reporting.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weight of the depth term in [`total_loss`].
pub const DEPTH_LOSS_WEIGHT: f64 = 0.01;

/// Mean absolute difference over all elements.
pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "l1 between {} and {}",
            pred.shape(),
            target.shape()
        )));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// Hinge on the average predicted depth exceeding the desired depth.
pub fn depth_loss(average_depth: f64, desired: f64) -> f64 {
    (average_depth - desired).max(0.0)
}

pub fn total_loss(reconstruction: f64, depth: f64, weight: f64) -> f64 {
    reconstruction + weight * depth
}

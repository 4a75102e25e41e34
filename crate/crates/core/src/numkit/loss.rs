use serde::{Deserialize, Serialize};

use crate::error::{dim, Result};

/// Mean-reduced regression losses.
///
/// `SmoothL1` uses a unit threshold: `0.5 d^2` when `|d| < 1`, `|d| - 0.5` otherwise.
/// It is the same function as the Huber loss with `delta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    L1,
    SmoothL1,
}

impl LossKind {
    pub fn pointwise(self, d: f64) -> f64 {
        match self {
            LossKind::L1 => d.abs(),
            LossKind::SmoothL1 => {
                if d.abs() < 1.0 {
                    0.5 * d * d
                } else {
                    d.abs() - 0.5
                }
            }
        }
    }

    /// Derivative of [`pointwise`](Self::pointwise) with respect to `d`; zero at the L1 kink.
    pub fn derivative(self, d: f64) -> f64 {
        match self {
            LossKind::L1 => {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossKind::SmoothL1 => d.clamp(-1.0, 1.0),
        }
    }
}

/// Mean of `kind.pointwise(pred - target)`.
pub fn loss(kind: LossKind, pred: &[f64], target: &[f64]) -> Result<f64> {
    dim("loss", pred.len(), target.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| kind.pointwise(p - t))
        .sum();
    Ok(total / pred.len() as f64)
}

//! Convex combination of two forecasters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HybridError {
    #[error("weights must be non-negative and sum to one, got {0} and {1}")]
    InvalidWeights(f64, f64),
    #[error("forecasts are on different scales ({0:?} vs {1:?})")]
    ScaleMismatch(Scale, Scale),
    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
}

pub type Result<T> = std::result::Result<T, HybridError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Transformed,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for HybridWeights {
    fn default() -> Self {
        Self { lambda1: 0.5, lambda2: 0.5 }
    }
}

impl HybridWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if lambda1 < 0.0 || lambda2 < 0.0 || (lambda1 + lambda2 - 1.0).abs() > 1e-12 {
            return Err(HybridError::InvalidWeights(lambda1, lambda2));
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// Weight `lambda1` on the first model, `1 - lambda1` on the second.
    pub fn first(lambda1: f64) -> Result<Self> {
        Self::new(lambda1, 1.0 - lambda1)
    }

    fn mix(&self, a: f64, b: f64) -> f64 {
        // exact degeneracy: a zero weight must not perturb the other value
        if self.lambda2 == 0.0 {
            a
        } else if self.lambda1 == 0.0 {
            b
        } else {
            self.lambda1 * a + self.lambda2 * b
        }
    }
}

/// A point forecast tagged with the scale it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    pub value: f64,
    pub scale: Scale,
}

pub fn combine_point(gpr: Tagged, svr: Tagged, weights: &HybridWeights) -> Result<Tagged> {
    if gpr.scale != svr.scale {
        return Err(HybridError::ScaleMismatch(gpr.scale, svr.scale));
    }
    Ok(Tagged { value: weights.mix(gpr.value, svr.value), scale: gpr.scale })
}

pub fn combine_interval(gpr: (f64, f64), svr: (f64, f64), weights: &HybridWeights) -> Result<(f64, f64)> {
    for (lower, upper) in [gpr, svr] {
        if !(lower <= upper) {
            return Err(HybridError::InvalidInterval { lower, upper });
        }
    }
    Ok((weights.mix(gpr.0, svr.0), weights.mix(gpr.1, svr.1)))
}

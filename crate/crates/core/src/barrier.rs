//! Semi-definite barrier gains and the nested barrier ladder.
//!
//! A barrier of width `eps` produces gains that vanish at `s = 0` and grow
//! without bound as `|s|` approaches `eps`:
//!
//! ```text
//! k1(s) = |s| / (eps - |s|)^(alpha + 1)
//! k2(s) = k1(s)^2
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gains are evaluated no closer than this fraction of the width to the barrier.
pub const BOUNDARY_CLAMP: f64 = 1e-9;

/// Tolerance used to decide that `alpha` is exactly one half.
const HALF_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("|s| = {s_abs} lies outside the barrier of width {eps}")]
    OutsideBarrier { s_abs: f64, eps: f64 },
    #[error("barrier ladder is empty")]
    EmptyLadder,
    #[error("barrier width at index {index} is not a positive finite number ({width})")]
    NonPositive { index: usize, width: f64 },
    #[error("barrier widths are not strictly increasing at index {index} ({prev} >= {width})")]
    NonMonotone { index: usize, prev: f64, width: f64 },
    #[error(
        "barrier width at index {index} ({width}) violates the admissibility bound {bound} for alpha = {alpha}"
    )]
    Inadmissible {
        index: usize,
        width: f64,
        bound: f64,
        alpha: f64,
    },
    #[error("alpha must be a positive finite number, got {0}")]
    InvalidAlpha(f64),
    #[error("ladder range needs eps_minus < eps_plus and N >= 2 (got {eps_minus}, {eps_plus}, N = {count})")]
    InvalidRange {
        eps_minus: f64,
        eps_plus: f64,
        count: usize,
    },
}

/// Non-negative gain pair applied to the super-twisting law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPair {
    pub k1: f64,
    pub k2: f64,
}

impl GainPair {
    pub const ZERO: GainPair = GainPair { k1: 0.0, k2: 0.0 };

    pub fn new(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Logarithmic,
}

impl std::str::FromStr for Spacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "logarithmic" | "log" => Ok(Spacing::Logarithmic),
            other => Err(format!("unknown spacing '{other}' (expected linear or logarithmic)")),
        }
    }
}

/// Strictly increasing barrier widths `eps_1 < ... < eps_N`.
///
/// Only constructible through [`validate_ladder`] or [`ladder_from_range`],
/// so every instance satisfies the admissibility bound for the `alpha` it was
/// validated against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierLadder {
    widths: Vec<f64>,
}

impl BarrierLadder {
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Number of barrier layers `N`.
    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    /// Innermost width `eps_1`.
    pub fn inner(&self) -> f64 {
        self.widths[0]
    }

    /// Outermost width `eps_N`.
    pub fn outer(&self) -> f64 {
        self.widths[self.widths.len() - 1]
    }

    /// Width of layer `i`, 1-based.
    pub fn width(&self, layer: usize) -> f64 {
        self.widths[layer - 1]
    }
}

/// Upper bound on admissible widths, `4^(1/(2 alpha - 1))`, or `None` when
/// `alpha = 1/2` and every positive width is admissible.
pub fn admissibility_bound(alpha: f64) -> Option<f64> {
    if (2.0 * alpha - 1.0).abs() < HALF_TOL {
        None
    } else {
        Some(4f64.powf(1.0 / (2.0 * alpha - 1.0)))
    }
}

/// `k1 = s_abs / (eps - s_abs)^(alpha + 1)`; rejects `s_abs >= eps`.
pub fn barrier_k1(s_abs: f64, eps: f64, alpha: f64) -> Result<f64, BarrierError> {
    if !(s_abs < eps) {
        return Err(BarrierError::OutsideBarrier { s_abs, eps });
    }
    Ok(s_abs / (eps - s_abs).powf(alpha + 1.0))
}

/// Same as [`barrier_k1`] but evaluates at `(1 - BOUNDARY_CLAMP) * eps` when
/// `s_abs` is closer to the barrier than that, keeping the gain finite.
pub fn barrier_k1_clamped(s_abs: f64, eps: f64, alpha: f64) -> f64 {
    let limit = (1.0 - BOUNDARY_CLAMP) * eps;
    let s = s_abs.min(limit);
    s / (eps - s).powf(alpha + 1.0)
}

pub fn barrier_k2(k1: f64) -> f64 {
    k1 * k1
}

/// Barrier gain pair for layer width `eps`, clamped near the boundary.
pub fn barrier_gains(s_abs: f64, eps: f64, alpha: f64) -> GainPair {
    let k1 = barrier_k1_clamped(s_abs, eps, alpha);
    GainPair::new(k1, barrier_k2(k1))
}

pub fn validate_alpha(alpha: f64) -> Result<(), BarrierError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(BarrierError::InvalidAlpha(alpha))
    }
}

pub fn validate_ladder(widths: &[f64], alpha: f64) -> Result<BarrierLadder, BarrierError> {
    validate_alpha(alpha)?;
    if widths.is_empty() {
        return Err(BarrierError::EmptyLadder);
    }
    let bound = admissibility_bound(alpha);
    for (index, &width) in widths.iter().enumerate() {
        if !(width.is_finite() && width > 0.0) {
            return Err(BarrierError::NonPositive { index, width });
        }
        if index > 0 && widths[index - 1] >= width {
            return Err(BarrierError::NonMonotone {
                index,
                prev: widths[index - 1],
                width,
            });
        }
        if let Some(bound) = bound {
            if width >= bound {
                return Err(BarrierError::Inadmissible {
                    index,
                    width,
                    bound,
                    alpha,
                });
            }
        }
    }
    Ok(BarrierLadder {
        widths: widths.to_vec(),
    })
}

/// Builds `count` widths from `eps_minus` to `eps_plus` (both exact) with the
/// requested spacing.
pub fn ladder_from_range(
    eps_minus: f64,
    eps_plus: f64,
    count: usize,
    spacing: Spacing,
    alpha: f64,
) -> Result<BarrierLadder, BarrierError> {
    if count < 2 || !(eps_minus < eps_plus) {
        return Err(BarrierError::InvalidRange {
            eps_minus,
            eps_plus,
            count,
        });
    }
    let last = (count - 1) as f64;
    let widths: Vec<f64> = (0..count)
        .map(|i| {
            if i == 0 {
                eps_minus
            } else if i == count - 1 {
                eps_plus
            } else {
                let frac = i as f64 / last;
                match spacing {
                    Spacing::Linear => eps_minus + frac * (eps_plus - eps_minus),
                    Spacing::Logarithmic => {
                        (eps_minus.ln() + frac * (eps_plus.ln() - eps_minus.ln())).exp()
                    }
                }
            }
        })
        .collect();
    validate_ladder(&widths, alpha)
}

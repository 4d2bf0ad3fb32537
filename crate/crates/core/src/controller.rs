//! One sample of the discrete multi-layer super-twisting controller.
//!
//! ```text
//! u_k     = ((u1 - 1) / Ts) s_k + v_k
//! v_{k+1} = v_k + u2 s_k
//! ```

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::barrier::{BarrierError, BarrierLadder, GainPair};
use crate::discretization::{
    continuous_eigenvalues, euler_coeffs, matched_coeffs, DiscreteCoeffs, EigenPair, Scheme,
};
use crate::switching::{a0_update, ai_update, select_layer, AdaptationLimits, AdaptiveGainState, LayerId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("non-finite sliding variable s = {0} at controller input")]
    NonFinite(f64),
    #[error("sampling period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("s_floor = {s_floor} must be positive and at most 1e-3 * eps_1 = {limit}")]
    InvalidSFloor { s_floor: f64, limit: f64 },
    #[error("gain limits must satisfy 0 < floor <= cap (k1 cap {k1_cap}, k2 cap {k2_cap}, floor {floor})")]
    InvalidLimits { k1_cap: f64, k2_cap: f64, floor: f64 },
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerConfig {
    pub alpha: f64,
    pub ladder: BarrierLadder,
    pub ts: f64,
    pub limits: AdaptationLimits,
    /// Optional symmetric saturation of the control output.
    pub u_max: Option<f64>,
}

impl ControllerConfig {
    /// Default singularity threshold `1e-12 * max(1, eps_1)`.
    pub fn default_s_floor(eps_1: f64) -> f64 {
        1e-12 * eps_1.max(1.0)
    }

    /// Config with default caps, floors and singularity threshold.
    pub fn new(alpha: f64, ladder: BarrierLadder, ts: f64) -> Result<Self, ControllerError> {
        let s_floor = Self::default_s_floor(ladder.inner());
        let cfg = Self {
            alpha,
            limits: AdaptationLimits::for_alpha(alpha, s_floor),
            ladder,
            ts,
            u_max: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        crate::barrier::validate_alpha(self.alpha)?;
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(ControllerError::InvalidPeriod(self.ts));
        }
        let limit = 1e-3 * self.ladder.inner();
        let s_floor = self.limits.s_floor;
        if !(s_floor > 0.0 && s_floor <= limit) {
            return Err(ControllerError::InvalidSFloor { s_floor, limit });
        }
        let l = &self.limits;
        if !(l.floor > 0.0 && l.floor <= l.k1_cap && l.floor <= l.k2_cap && l.d_floor > 0.0) {
            return Err(ControllerError::InvalidLimits {
                k1_cap: l.k1_cap,
                k2_cap: l.k2_cap,
                floor: l.floor,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerState {
    pub v: f64,
    /// Layer chosen at the previous sample; `A0` before the first sample.
    pub a: LayerId,
    pub adapt: AdaptiveGainState,
    pub sample_index: u64,
}

impl ControllerState {
    pub fn reset(_cfg: &ControllerConfig) -> Self {
        Self {
            v: 0.0,
            a: LayerId::A0,
            adapt: AdaptiveGainState::default(),
            sample_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub layer: LayerId,
    pub gains: GainPair,
    pub coeffs: DiscreteCoeffs,
    /// `None` when the singularity guard was taken.
    pub eigenvalues: Option<EigenPair>,
    pub singular: bool,
}

impl StepDiagnostics {
    pub fn discrete_eigenvalues(&self, ts: f64) -> Option<(Complex64, Complex64)> {
        self.eigenvalues
            .as_ref()
            .map(|p| crate::discretization::match_eigenvalues(p, ts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub u: f64,
    pub state: ControllerState,
    pub diag: StepDiagnostics,
}

/// Runs layer selection, gain modulation, discretization and the control
/// law for the sample `s_k`.
pub fn control_step(
    s_k: f64,
    state: &ControllerState,
    cfg: &ControllerConfig,
    scheme: Scheme,
) -> Result<StepOutput, ControllerError> {
    if !s_k.is_finite() {
        return Err(ControllerError::NonFinite(s_k));
    }
    let s_abs = s_k.abs();
    let layer = select_layer(s_abs, &cfg.ladder, state.a);
    let (gains, adapt) = if layer.is_adaptive() {
        a0_update(&state.adapt, s_k, cfg.ts, cfg.alpha, &cfg.limits)
    } else {
        ai_update(&state.adapt, s_k, layer, &cfg.ladder, cfg.ts, cfg.alpha, &cfg.limits)
    };

    let singular = s_abs <= cfg.limits.s_floor;
    let (coeffs, eigenvalues) = if singular {
        (DiscreteCoeffs::IDENTITY, None)
    } else {
        // s_abs > s_floor > 0, so neither call can hit the singular state
        let pair = continuous_eigenvalues(gains.k1, gains.k2, s_abs, cfg.alpha)
            .expect("s_abs is above the singularity floor");
        let coeffs = match scheme {
            Scheme::Matching => matched_coeffs(&pair, cfg.ts),
            Scheme::Euler => euler_coeffs(gains.k1, gains.k2, s_abs, cfg.alpha, cfg.ts)
                .expect("s_abs is above the singularity floor"),
        };
        (coeffs, Some(pair))
    };

    let mut u = coeffs.u1_excess / cfg.ts * s_k + state.v;
    if let Some(u_max) = cfg.u_max {
        u = u.clamp(-u_max, u_max);
    }
    let next = ControllerState {
        v: state.v + coeffs.u2_tilde * s_k,
        a: layer,
        adapt,
        sample_index: state.sample_index + 1,
    };
    Ok(StepOutput {
        u,
        state: next,
        diag: StepDiagnostics {
            layer,
            gains,
            coeffs,
            eigenvalues,
            singular,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::validate_ladder;
    use crate::discretization::{discrete_coeffs, match_eigenvalues};

    fn cfg() -> ControllerConfig {
        ControllerConfig::new(0.5, validate_ladder(&[1e-4, 1e-1], 0.5).unwrap(), 1e-5).unwrap()
    }

    #[test]
    fn reset_is_zeroed_and_repeatable() {
        let c = cfg();
        let a = ControllerState::reset(&c);
        assert_eq!(a.v, 0.0);
        assert_eq!(a.sample_index, 0);
        assert_eq!(a, ControllerState::reset(&c));
    }

    #[test]
    fn zero_sample_holds_integral() {
        let c = cfg();
        let mut st = ControllerState::reset(&c);
        st.v = 3.5;
        let out = control_step(0.0, &st, &c, Scheme::Matching).unwrap();
        assert_eq!(out.u, 3.5);
        assert_eq!(out.state.v, 3.5);
        assert_eq!(out.diag.layer, LayerId(1));
        assert!(out.diag.singular);
        assert_eq!(out.state.sample_index, 1);
    }

    #[test]
    fn non_finite_input_is_error() {
        let c = cfg();
        let st = ControllerState::reset(&c);
        assert!(control_step(f64::NAN, &st, &c, Scheme::Matching).is_err());
        assert!(control_step(f64::INFINITY, &st, &c, Scheme::Euler).is_err());
    }

    #[test]
    fn matches_printed_law_with_frozen_gains() {
        let c = cfg();
        let mut st = ControllerState::reset(&c);
        st.v = -0.7;
        st.a = LayerId(1);
        let s = 4e-5;
        let out = control_step(s, &st, &c, Scheme::Matching).unwrap();

        // re-derive from the published two-line law
        let g = crate::barrier::barrier_gains(s, 1e-4, 0.5);
        assert_eq!(out.diag.gains, g);
        let p = continuous_eigenvalues(g.k1, g.k2, s, 0.5).unwrap();
        let (l1, l2) = match_eigenvalues(&p, c.ts);
        let d = discrete_coeffs(l1, l2, c.ts).unwrap();
        let u = (1.0 / c.ts) * (-s + d.u1_tilde * s) + st.v;
        let v = st.v + d.u2_tilde * s;
        assert!((out.u - u).abs() <= 1e-9 * u.abs().max(1.0), "{} vs {}", out.u, u);
        assert!((out.state.v - v).abs() <= 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn saturation_is_optional() {
        let mut c = cfg();
        let st = ControllerState::reset(&c);
        let free = control_step(0.05, &st, &c, Scheme::Matching).unwrap();
        c.u_max = Some(1.0);
        let sat = control_step(0.05, &st, &c, Scheme::Matching).unwrap();
        assert!(free.u.abs() > 1.0);
        assert_eq!(sat.u.abs(), 1.0);
    }

    #[test]
    fn s_floor_bound_enforced() {
        let mut c = cfg();
        c.limits.s_floor = 1e-6;
        assert!(matches!(c.validate(), Err(ControllerError::InvalidSFloor { .. })));
    }
}

//! Perturbed integrator `x' = u0 + d(t)` under zero-order-hold control.
//!
//! The plant is integrated with fixed-step RK4 between samples while the
//! control is held constant, so disturbance action between two samples is
//! invisible to the controller until the next one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{control_step, ControllerConfig, ControllerError, ControllerState};
use crate::discretization::Scheme;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state diverged at sample {index} (t = {t}): x = {x}")]
    Diverged { index: u64, t: f64, x: f64 },
    #[error("controller failed at sample {index}: {source}")]
    Controller {
        index: u64,
        #[source]
        source: ControllerError,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// `d(t) = bias + amplitude * sin(frequency * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub bias: f64,
}

impl DisturbanceSpec {
    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            bias: 0.0,
        }
    }

    pub fn constant(bias: f64) -> Self {
        Self {
            amplitude: 0.0,
            frequency: 0.0,
            bias,
        }
    }

    pub fn none() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.bias + self.amplitude * (self.frequency * t).sin()
    }

    /// `delta(t) = d'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.amplitude * self.frequency * (self.frequency * t).cos()
    }

    /// Bound on `|delta|`. Documentation only: the controller never uses it.
    pub fn delta_bound(&self) -> f64 {
        (self.amplitude * self.frequency).abs()
    }

    /// Exact integral of `d` over `[t0, t0 + h]`.
    pub fn integral(&self, t0: f64, h: f64) -> f64 {
        let osc = if self.frequency == 0.0 {
            0.0
        } else {
            self.amplitude / self.frequency
                * ((self.frequency * t0).cos() - (self.frequency * (t0 + h)).cos())
        };
        self.bias * h + osc
    }

    fn is_finite(&self) -> bool {
        self.amplitude.is_finite() && self.frequency.is_finite() && self.bias.is_finite()
    }
}

/// `x_ref(t) = amplitude * sin(frequency * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub amplitude: f64,
    pub frequency: f64,
}

impl ReferenceSpec {
    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            frequency: 0.0,
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).sin()
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        self.amplitude * self.frequency * (self.frequency * t).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub duration: f64,
    pub cfg: ControllerConfig,
    pub disturbance: DisturbanceSpec,
    pub reference: ReferenceSpec,
    pub substeps: u32,
    pub x0: f64,
}

impl Scenario {
    /// 100 substeps per sample, 10 at sampling periods below `1e-4`.
    pub fn default_substeps(ts: f64) -> u32 {
        if ts >= 1e-4 * (1.0 - 1e-9) {
            100
        } else {
            10
        }
    }

    /// Samples `k = 0 ..= floor(duration / Ts)`.
    pub fn sample_count(&self) -> u64 {
        (self.duration / self.cfg.ts + 1e-9).floor() as u64 + 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.substeps == 0 {
            return Err(SimError::InvalidScenario("substeps must be >= 1".into()));
        }
        if !(self.x0.is_finite()
            && self.disturbance.is_finite()
            && self.reference.amplitude.is_finite()
            && self.reference.frequency.is_finite())
        {
            return Err(SimError::InvalidScenario(
                "initial state, disturbance and reference must be finite".into(),
            ));
        }
        self.cfg
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))
    }
}

/// One row per controller sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub x_ref: f64,
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub layer: u32,
    pub k1: f64,
    pub k2: f64,
    pub d: f64,
    /// `v + d`, the lumped perturbation seen by the sliding dynamics.
    pub phi: f64,
}

/// Advances `x' = u_hold + d(t)` over `[t0, t0 + ts]` with `substeps` RK4 steps.
pub fn integrate_interval(
    x: f64,
    u_hold: f64,
    t0: f64,
    ts: f64,
    substeps: u32,
    dist: &DisturbanceSpec,
) -> f64 {
    let m = substeps.max(1);
    let h = ts / m as f64;
    let inv = 1.0 / m as f64;
    let mut x = x;
    let mut f_left = u_hold + dist.value(t0);
    for j in 0..m {
        let ta = t0 + ts * (j as f64 * inv);
        let tb = t0 + ts * ((j + 1) as f64 * inv);
        let f_mid = u_hold + dist.value(0.5 * (ta + tb));
        let f_right = u_hold + dist.value(tb);
        // RK4 with a time-only right-hand side: k2 = k3 = f_mid
        x += h / 6.0 * (f_left + 4.0 * f_mid + f_right);
        f_left = f_right;
    }
    x
}

/// Runs the closed loop and hands every record to `sink` in sample order.
pub fn simulate<F>(scn: &Scenario, scheme: Scheme, mut sink: F) -> Result<(), SimError>
where
    F: FnMut(&StepRecord),
{
    scn.validate()?;
    let ts = scn.cfg.ts;
    let mut state = ControllerState::reset(&scn.cfg);
    let mut x = scn.x0;
    for k in 0..scn.sample_count() {
        let t = k as f64 * ts;
        if !x.is_finite() {
            return Err(SimError::Diverged { index: k, t, x });
        }
        let x_ref = scn.reference.value(t);
        let s = x - x_ref;
        let out = control_step(s, &state, &scn.cfg, scheme)
            .map_err(|source| SimError::Controller { index: k, source })?;
        let d = scn.disturbance.value(t);
        sink(&StepRecord {
            t,
            x,
            x_ref,
            s,
            u: out.u,
            v: state.v,
            layer: out.diag.layer.0,
            k1: out.diag.gains.k1,
            k2: out.diag.gains.k2,
            d,
            phi: state.v + d,
        });
        let u0 = out.u + scn.reference.rate(t);
        x = integrate_interval(x, u0, t, ts, scn.substeps, &scn.disturbance);
        state = out.state;
    }
    Ok(())
}

pub fn run_closed_loop(scn: &Scenario, scheme: Scheme) -> Result<Vec<StepRecord>, SimError> {
    let mut trace = Vec::with_capacity(scn.sample_count() as usize);
    simulate(scn, scheme, |r| trace.push(*r))?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::validate_ladder;

    #[test]
    fn unforced_and_pure_hold() {
        let none = DisturbanceSpec::none();
        assert_eq!(integrate_interval(1.0, 0.0, 0.3, 1e-3, 100, &none), 1.0);
        let x = integrate_interval(0.0, 2.5, 0.0, 1e-3, 100, &none);
        assert!((x - 2.5e-3).abs() < 1e-16);
    }

    #[test]
    fn sinusoid_integral_closed_form() {
        let d = DisturbanceSpec::sinusoid(1e3, 15.0);
        let x = integrate_interval(0.0, 0.0, 0.0, 1e-3, 100, &d);
        let exact = 1e3 / 15.0 * (1.0 - 0.015f64.cos());
        assert!((x - exact).abs() <= 1e-10 * exact);
        assert!((x - 7.499859376e-3).abs() < 1e-12);
        assert!((d.integral(0.0, 1e-3) - exact).abs() < 1e-18);
    }

    #[test]
    fn substep_defaults() {
        assert_eq!(Scenario::default_substeps(1e-2), 100);
        assert_eq!(Scenario::default_substeps(1e-4), 100);
        assert_eq!(Scenario::default_substeps(1e-5), 10);
    }

    #[test]
    fn equilibrium_stays_put() {
        let cfg = crate::controller::ControllerConfig::new(
            0.5,
            validate_ladder(&[1e-4, 1e-1], 0.5).unwrap(),
            1e-4,
        )
        .unwrap();
        let scn = Scenario {
            duration: 0.1,
            cfg,
            disturbance: DisturbanceSpec::none(),
            reference: ReferenceSpec::zero(),
            substeps: 10,
            x0: 0.0,
        };
        let trace = run_closed_loop(&scn, Scheme::Matching).unwrap();
        assert_eq!(trace.len(), 1001);
        for (k, r) in trace.iter().enumerate() {
            assert_eq!((r.s, r.u, r.v), (0.0, 0.0, 0.0));
            assert_eq!(r.t, k as f64 * 1e-4);
        }
    }
}

//! Discrete-time multi-layer barrier adaptive super-twisting control.
//!
//! The crate is organised bottom-up:
//!
//! - [`barrier`]: barrier gain functions and the nested width ladder
//! - [`switching`]: layer selection with one-step memory, A0 / A_i gain modulation
//! - [`discretization`]: frozen-state eigenvalues, exact matching, Euler baseline
//! - [`controller`]: one controller sample
//! - [`plant`]: zero-order-hold closed-loop simulation of the perturbed integrator
//! - [`experiments`]: run metrics and parameter sweeps
//! - [`config`], [`io`], [`cli`]: configuration, file formats and the command line

pub mod barrier;
pub mod cli;
pub mod config;
pub mod controller;
pub mod discretization;
pub mod experiments;
pub mod io;
pub mod plant;
pub mod switching;

pub use barrier::{BarrierLadder, GainPair, Spacing};
pub use config::{ResolvedConfig, ScenarioConfig};
pub use controller::{control_step, ControllerConfig, ControllerState};
pub use discretization::{DiscreteCoeffs, EigenPair, Scheme};
pub use experiments::{compute_metrics, run_sweep, RunMetrics, SweepGrid};
pub use plant::{run_closed_loop, Scenario, StepRecord};
pub use switching::LayerId;

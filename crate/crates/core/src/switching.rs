//! Nested layer selection with one-step memory and the A0 / A_i gain
//! modulation.
//!
//! Layer 0 (`A0`) runs dynamic gain adaptation and is sticky: once active it
//! is kept for every `|s|` between the innermost and outermost barriers, and
//! only released when `|s|` drops below `eps_1`. Layers `1..=N` apply the
//! barrier gains of their width while the dynamic gains decay.

use serde::{Deserialize, Serialize};

use crate::barrier::{barrier_gains, BarrierLadder, GainPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u32);

impl LayerId {
    pub const A0: LayerId = LayerId(0);
    pub const INNERMOST: LayerId = LayerId(1);

    pub fn is_adaptive(self) -> bool {
        self.0 == 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for LayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "A{}", self.0)
    }
}

/// Bounds for the dynamic adaptation gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationLimits {
    pub k1_cap: f64,
    pub k2_cap: f64,
    pub floor: f64,
    /// Floor on the `|ds/dt|` estimate.
    pub d_floor: f64,
    /// Floor on `|s|` in the `k2` adaptation rate.
    pub s_floor: f64,
}

impl AdaptationLimits {
    pub const DEFAULT_FLOOR: f64 = 1e-6;
    pub const DEFAULT_D_FLOOR: f64 = 1e-9;

    /// `k1_cap = max(25000^alpha, 5)`, `k2_cap = k1_cap^2`.
    pub fn default_caps(alpha: f64) -> (f64, f64) {
        let k1 = 25000f64.powf(alpha).max(5.0);
        (k1, k1 * k1)
    }

    pub fn for_alpha(alpha: f64, s_floor: f64) -> Self {
        let (k1_cap, k2_cap) = Self::default_caps(alpha);
        Self {
            k1_cap,
            k2_cap,
            floor: Self::DEFAULT_FLOOR,
            d_floor: Self::DEFAULT_D_FLOOR,
            s_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGainState {
    pub k1d: f64,
    pub k2d: f64,
    pub s_prev: f64,
    pub have_prev: bool,
}

impl Default for AdaptiveGainState {
    fn default() -> Self {
        Self {
            k1d: 1.0,
            k2d: 1.0,
            s_prev: 0.0,
            have_prev: false,
        }
    }
}

/// Layer selection for the current sample.
///
/// Intervals are left-closed and right-open: layer `i` owns
/// `eps_{i-1} <= |s| < eps_i`, and `|s| >= eps_N` always maps to `A0`.
pub fn select_layer(s_abs: f64, ladder: &BarrierLadder, a_prev: LayerId) -> LayerId {
    let widths = ladder.widths();
    if s_abs < ladder.inner() {
        return LayerId::INNERMOST;
    }
    // NaN falls through to A0 together with |s| >= eps_N
    if !(s_abs < ladder.outer()) || a_prev.is_adaptive() {
        return LayerId::A0;
    }
    // number of widths <= s_abs; eps_{i-1} <= s_abs < eps_i gives i = count + 1
    let below = widths.partition_point(|&w| w <= s_abs);
    LayerId(below as u32 + 1)
}

fn clamp_gain(value: f64, floor: f64, cap: f64) -> f64 {
    if value.is_nan() {
        return cap;
    }
    value.min(cap).max(floor)
}

/// One forward-Euler step of the A0 adaptation law
/// `dk1d/dt = k1d / |ds/dt|`, `dk2d/dt = k2d / (2 |s|^(1 - alpha))`.
///
/// The returned gains are the updated dynamic gains.
pub fn a0_update(
    state: &AdaptiveGainState,
    s: f64,
    ts: f64,
    alpha: f64,
    limits: &AdaptationLimits,
) -> (GainPair, AdaptiveGainState) {
    let sdot = if state.have_prev {
        ((s - state.s_prev) / ts).abs()
    } else {
        0.0
    };
    let sdot = sdot.max(limits.d_floor);
    let s_abs = s.abs().max(limits.s_floor);

    let k1d = state.k1d + ts * state.k1d / sdot;
    let k2d = state.k2d + ts * state.k2d / (2.0 * s_abs.powf(1.0 - alpha));
    let k1d = clamp_gain(k1d, limits.floor, limits.k1_cap);
    let k2d = clamp_gain(k2d, limits.floor, limits.k2_cap);

    let next = AdaptiveGainState {
        k1d,
        k2d,
        s_prev: s,
        have_prev: true,
    };
    (GainPair::new(k1d, k2d), next)
}

/// Barrier layer `layer >= 1`: decay the dynamic gains by one Euler step of
/// `dk/dt = -k` and apply the barrier gains of width `eps_layer`.
pub fn ai_update(
    state: &AdaptiveGainState,
    s: f64,
    layer: LayerId,
    ladder: &BarrierLadder,
    ts: f64,
    alpha: f64,
    limits: &AdaptationLimits,
) -> (GainPair, AdaptiveGainState) {
    debug_assert!(!layer.is_adaptive() && layer.index() <= ladder.len());
    let decay = 1.0 - ts;
    let next = AdaptiveGainState {
        k1d: clamp_gain(state.k1d * decay, limits.floor, limits.k1_cap),
        k2d: clamp_gain(state.k2d * decay, limits.floor, limits.k2_cap),
        s_prev: s,
        have_prev: true,
    };
    let applied = barrier_gains(s.abs(), ladder.width(layer.index()), alpha);
    (applied, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::validate_ladder;

    fn limits() -> AdaptationLimits {
        AdaptationLimits::for_alpha(0.5, 1e-12)
    }

    fn ladder3() -> BarrierLadder {
        validate_ladder(&[1e-3, 1e-2, 1e-1], 0.5).unwrap()
    }

    #[test]
    fn outside_outer_is_a0() {
        let l = ladder3();
        for a in 0..=3 {
            assert_eq!(select_layer(0.2, &l, LayerId(a)), LayerId::A0);
        }
        // right-open: eps_N itself is outside
        assert_eq!(select_layer(0.1, &l, LayerId(2)), LayerId::A0);
    }

    #[test]
    fn inside_inner_is_a1() {
        let l = ladder3();
        for a in 0..=3 {
            assert_eq!(select_layer(5e-4, &l, LayerId(a)), LayerId(1));
        }
        assert_eq!(select_layer(0.0, &l, LayerId::A0), LayerId(1));
    }

    #[test]
    fn middle_depends_on_memory() {
        let l = ladder3();
        let s = 5e-3;
        assert_eq!(select_layer(s, &l, LayerId::A0), LayerId::A0);
        assert_eq!(select_layer(s, &l, LayerId(3)), LayerId(2));
        assert_eq!(select_layer(s, &l, LayerId(1)), LayerId(2));
        assert_eq!(select_layer(5e-2, &l, LayerId(1)), LayerId(3));
        // left-closed
        assert_eq!(select_layer(1e-3, &l, LayerId(1)), LayerId(2));
        assert_eq!(select_layer(1e-2, &l, LayerId(1)), LayerId(3));
    }

    #[test]
    fn single_layer_ladder() {
        let l = validate_ladder(&[0.1], 0.5).unwrap();
        assert_eq!(select_layer(0.05, &l, LayerId::A0), LayerId(1));
        assert_eq!(select_layer(0.1, &l, LayerId(1)), LayerId::A0);
        assert_eq!(select_layer(0.3, &l, LayerId(1)), LayerId::A0);
    }

    #[test]
    fn a0_single_step_by_hand() {
        let state = AdaptiveGainState {
            k1d: 1.0,
            k2d: 1.0,
            s_prev: 1.0 - 1e-3,
            have_prev: true,
        };
        // (s - s_prev) / Ts = 1
        let (g, next) = a0_update(&state, 1.0, 1e-3, 0.5, &limits());
        assert!((next.k1d - 1.001).abs() < 1e-12);
        assert!((next.k2d - 1.0005).abs() < 1e-12);
        assert_eq!(g, GainPair::new(next.k1d, next.k2d));
        assert_eq!(next.s_prev, 1.0);
        assert!(next.have_prev);
    }

    #[test]
    fn a0_first_sample_uses_d_floor() {
        let lim = limits();
        let state = AdaptiveGainState::default();
        let (g, _) = a0_update(&state, 0.2, 1e-5, 0.5, &lim);
        // 1 + 1e-5 / 1e-9 overshoots the cap
        assert_eq!(g.k1, lim.k1_cap);
        let expected_k2 = 1.0 + 1e-5 / (2.0 * 0.2f64.sqrt());
        assert!((g.k2 - expected_k2).abs() < 1e-15);
    }

    #[test]
    fn a0_cap_is_fixed_point() {
        let lim = limits();
        let state = AdaptiveGainState {
            k1d: lim.k1_cap,
            k2d: lim.k2_cap,
            s_prev: 0.3,
            have_prev: true,
        };
        let (g, next) = a0_update(&state, 0.2, 1e-4, 0.5, &lim);
        assert_eq!(g, GainPair::new(lim.k1_cap, lim.k2_cap));
        assert_eq!((next.k1d, next.k2d), (lim.k1_cap, lim.k2_cap));
    }

    #[test]
    fn default_caps() {
        let (k1, k2) = AdaptationLimits::default_caps(0.5);
        assert!((k1 - 25000f64.sqrt()).abs() < 1e-9);
        assert!((k2 - 25000.0).abs() < 1e-6);
        let (k1, _) = AdaptationLimits::default_caps(0.1);
        assert_eq!(k1, 5.0);
    }

    #[test]
    fn ai_decays_dynamic_gains() {
        let l = validate_ladder(&[1.0], 0.5).unwrap();
        let state = AdaptiveGainState {
            k1d: 2.0,
            k2d: 4.0,
            s_prev: 0.0,
            have_prev: true,
        };
        let (g, next) = ai_update(&state, 0.5, LayerId(1), &l, 0.1, 0.5, &limits());
        assert!((next.k1d - 1.8).abs() < 1e-15);
        assert!((next.k2d - 3.6).abs() < 1e-15);
        assert!((g.k1 - 2f64.sqrt()).abs() < 1e-12);
        assert!((g.k2 - 2.0).abs() < 1e-12);

        let (g, _) = ai_update(&state, 0.0, LayerId(1), &l, 0.1, 0.5, &limits());
        assert_eq!(g, GainPair::ZERO);
    }

    #[test]
    fn ai_respects_floor() {
        let l = validate_ladder(&[1.0], 0.5).unwrap();
        let lim = limits();
        let mut state = AdaptiveGainState::default();
        for _ in 0..10_000 {
            state = ai_update(&state, 0.1, LayerId(1), &l, 0.5, 0.5, &lim).1;
        }
        assert_eq!(state.k1d, lim.floor);
        assert_eq!(state.k2d, lim.floor);
    }
}

//! Scenario configuration: every key optional, defaults resolved explicitly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{admissibility_bound, ladder_from_range, validate_ladder, BarrierError, Spacing};
use crate::controller::ControllerConfig;
use crate::discretization::Scheme;
use crate::plant::{DisturbanceSpec, ReferenceSpec, Scenario};
use crate::switching::AdaptationLimits;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_EPS_MINUS: f64 = 1e-4;
pub const DEFAULT_TS: f64 = 1e-5;
pub const DEFAULT_LAYERS: usize = 2;
pub const DEFAULT_DURATION: f64 = 10.0;
pub const DEFAULT_X0: f64 = 0.0;
pub const DEFAULT_WINDOW: f64 = 0.5;
/// Rows written without decimation before the automatic factor kicks in.
pub const AUTO_DECIMATION_ROWS: u64 = 2_000_000;
pub const AUTO_DECIMATION_FACTOR: u64 = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Nominal,
    /// Disturbance amplitude lowered from `1e3` to `1e1`, used by the
    /// sampling-period and barrier-count studies.
    ReducedAmplitude,
}

impl Preset {
    pub fn disturbance_amplitude(self) -> f64 {
        match self {
            Preset::Nominal => 1e3,
            Preset::ReducedAmplitude => 1e1,
        }
    }
}

/// User-facing configuration. Missing keys take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub preset: Option<Preset>,
    pub alpha: Option<f64>,
    pub eps_minus: Option<f64>,
    /// Defaults to `min(1e-1, 1e3 * eps_minus)`.
    pub eps_plus: Option<f64>,
    pub n_layers: Option<usize>,
    pub spacing: Option<Spacing>,
    pub ts: Option<f64>,
    pub substeps: Option<u32>,
    pub duration: Option<f64>,
    pub x0: Option<f64>,
    pub disturbance_amplitude: Option<f64>,
    pub disturbance_frequency: Option<f64>,
    pub disturbance_bias: Option<f64>,
    pub reference_amplitude: Option<f64>,
    pub reference_frequency: Option<f64>,
    pub k1_cap: Option<f64>,
    pub k2_cap: Option<f64>,
    pub gain_floor: Option<f64>,
    pub d_floor: Option<f64>,
    pub s_floor: Option<f64>,
    pub u_max: Option<f64>,
    pub window_fraction: Option<f64>,
    pub decimation: Option<u64>,
    pub scheme: Option<Scheme>,
}

/// Every parameter of a run, after defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub preset: Preset,
    pub alpha: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub n_layers: usize,
    pub spacing: Spacing,
    pub widths: Vec<f64>,
    pub ts: f64,
    pub substeps: u32,
    pub duration: f64,
    pub samples: u64,
    pub x0: f64,
    pub disturbance_amplitude: f64,
    pub disturbance_frequency: f64,
    pub disturbance_bias: f64,
    pub delta_bound: f64,
    pub reference_amplitude: f64,
    pub reference_frequency: f64,
    pub k1_cap: f64,
    pub k2_cap: f64,
    pub gain_floor: f64,
    pub d_floor: f64,
    pub s_floor: f64,
    pub u_max: Option<f64>,
    pub window_fraction: f64,
    pub decimation: u64,
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

fn positive(key: &str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::invalid(key, format!("must be a positive finite number, got {value}")))
    }
}

fn finite(key: &str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::invalid(key, format!("must be finite, got {value}")))
    }
}

fn ladder_error(err: BarrierError, n_layers: usize) -> ConfigError {
    match err {
        BarrierError::Inadmissible {
            index,
            width,
            bound,
            alpha,
        } => {
            let key = if index == 0 {
                "eps_minus"
            } else if index + 1 == n_layers {
                "eps_plus"
            } else {
                "n_layers"
            };
            ConfigError::invalid(
                key,
                format!(
                    "barrier width {width} (layer {}) violates the admissibility bound \
                     eps < 4^(1/(2 alpha - 1)) = {bound} for alpha = {alpha}",
                    index + 1
                ),
            )
        }
        BarrierError::InvalidRange { .. } | BarrierError::NonMonotone { .. } => {
            ConfigError::invalid("eps_plus", format!("{err}; eps_minus < eps_plus is required"))
        }
        BarrierError::InvalidAlpha(_) => ConfigError::invalid("alpha", err.to_string()),
        other => ConfigError::invalid("eps_minus", other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let mut warnings = Vec::new();
        let preset = self.preset.unwrap_or(Preset::Nominal);

        let alpha = positive("alpha", self.alpha.unwrap_or(DEFAULT_ALPHA))?;
        if alpha > 1.0 {
            warnings.push(format!("alpha = {alpha} lies outside (0, 1]"));
        }
        let eps_minus = positive("eps_minus", self.eps_minus.unwrap_or(DEFAULT_EPS_MINUS))?;
        let n_layers = self.n_layers.unwrap_or(DEFAULT_LAYERS);
        if n_layers == 0 {
            return Err(ConfigError::invalid("n_layers", "must be at least 1"));
        }
        let eps_plus = match (self.eps_plus, n_layers) {
            (Some(v), _) => positive("eps_plus", v)?,
            (None, 1) => eps_minus,
            (None, _) => (1e-1f64).min(1e3 * eps_minus),
        };
        let spacing = self.spacing.unwrap_or_default();
        let ladder = if n_layers == 1 {
            if eps_plus != eps_minus {
                return Err(ConfigError::invalid(
                    "eps_plus",
                    format!("a single-layer ladder needs eps_plus == eps_minus ({eps_plus} != {eps_minus})"),
                ));
            }
            validate_ladder(&[eps_minus], alpha)
        } else {
            ladder_from_range(eps_minus, eps_plus, n_layers, spacing, alpha)
        }
        .map_err(|e| ladder_error(e, n_layers))?;

        let ts = positive("ts", self.ts.unwrap_or(DEFAULT_TS))?;
        let substeps = self.substeps.unwrap_or_else(|| Scenario::default_substeps(ts));
        if substeps == 0 {
            return Err(ConfigError::invalid("substeps", "must be at least 1"));
        }
        let duration = positive("duration", self.duration.unwrap_or(DEFAULT_DURATION))?;
        let x0 = finite("x0", self.x0.unwrap_or(DEFAULT_X0))?;

        let disturbance_amplitude = finite(
            "disturbance_amplitude",
            self.disturbance_amplitude
                .unwrap_or_else(|| preset.disturbance_amplitude()),
        )?;
        let disturbance_frequency =
            finite("disturbance_frequency", self.disturbance_frequency.unwrap_or(15.0))?;
        let disturbance_bias = finite("disturbance_bias", self.disturbance_bias.unwrap_or(0.0))?;
        let reference_amplitude =
            finite("reference_amplitude", self.reference_amplitude.unwrap_or(0.1))?;
        let reference_frequency =
            finite("reference_frequency", self.reference_frequency.unwrap_or(5.0))?;

        let (default_k1, default_k2) = AdaptationLimits::default_caps(alpha);
        let k1_cap = positive("k1_cap", self.k1_cap.unwrap_or(default_k1))?;
        let k2_cap = positive("k2_cap", self.k2_cap.unwrap_or_else(|| {
            if self.k1_cap.is_some() {
                k1_cap * k1_cap
            } else {
                default_k2
            }
        }))?;
        let gain_floor = positive(
            "gain_floor",
            self.gain_floor.unwrap_or(AdaptationLimits::DEFAULT_FLOOR),
        )?;
        if gain_floor > k1_cap || gain_floor > k2_cap {
            return Err(ConfigError::invalid(
                "gain_floor",
                format!("must not exceed the gain caps ({k1_cap}, {k2_cap})"),
            ));
        }
        let d_floor = positive("d_floor", self.d_floor.unwrap_or(AdaptationLimits::DEFAULT_D_FLOOR))?;
        let s_floor = positive(
            "s_floor",
            self.s_floor
                .unwrap_or_else(|| ControllerConfig::default_s_floor(eps_minus)),
        )?;
        if s_floor > 1e-3 * eps_minus {
            return Err(ConfigError::invalid(
                "s_floor",
                format!("must be at most 1e-3 * eps_minus = {}", 1e-3 * eps_minus),
            ));
        }
        let u_max = self.u_max.map(|v| positive("u_max", v)).transpose()?;
        let window_fraction = self.window_fraction.unwrap_or(DEFAULT_WINDOW);
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(ConfigError::invalid(
                "window_fraction",
                format!("must lie in (0, 1], got {window_fraction}"),
            ));
        }

        let samples = (duration / ts + 1e-9).floor() as u64 + 1;
        let decimation = match self.decimation {
            Some(0) => return Err(ConfigError::invalid("decimation", "must be at least 1")),
            Some(d) => d,
            None if samples > AUTO_DECIMATION_ROWS => AUTO_DECIMATION_FACTOR,
            None => 1,
        };

        Ok(ResolvedConfig {
            preset,
            alpha,
            eps_minus,
            eps_plus,
            n_layers,
            spacing,
            widths: ladder.widths().to_vec(),
            ts,
            substeps,
            duration,
            samples,
            x0,
            disturbance_amplitude,
            disturbance_frequency,
            disturbance_bias,
            delta_bound: (disturbance_amplitude * disturbance_frequency).abs(),
            reference_amplitude,
            reference_frequency,
            k1_cap,
            k2_cap,
            gain_floor,
            d_floor,
            s_floor,
            u_max,
            window_fraction,
            decimation,
            scheme: self.scheme.unwrap_or_default(),
            warnings,
        })
    }
}

impl ResolvedConfig {
    /// Admissibility bound on the widths for this `alpha`, if any.
    pub fn admissibility_bound(&self) -> Option<f64> {
        admissibility_bound(self.alpha)
    }

    pub fn scenario(&self) -> Scenario {
        let ladder =
            validate_ladder(&self.widths, self.alpha).expect("widths were validated on resolve");
        let cfg = ControllerConfig {
            alpha: self.alpha,
            ladder,
            ts: self.ts,
            limits: AdaptationLimits {
                k1_cap: self.k1_cap,
                k2_cap: self.k2_cap,
                floor: self.gain_floor,
                d_floor: self.d_floor,
                s_floor: self.s_floor,
            },
            u_max: self.u_max,
        };
        Scenario {
            duration: self.duration,
            cfg,
            disturbance: DisturbanceSpec {
                amplitude: self.disturbance_amplitude,
                frequency: self.disturbance_frequency,
                bias: self.disturbance_bias,
            },
            reference: ReferenceSpec {
                amplitude: self.reference_amplitude,
                frequency: self.reference_frequency,
            },
            substeps: self.substeps,
            x0: self.x0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_table_defaults() {
        let r = ScenarioConfig::from_json_str("").unwrap().resolve().unwrap();
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.eps_minus, 1e-4);
        assert_eq!(r.eps_plus, 1e-1);
        assert_eq!(r.ts, 1e-5);
        assert_eq!(r.widths, vec![1e-4, 1e-1]);
        assert_eq!(r.substeps, 10);
        assert_eq!(r.samples, 1_000_001);
        assert_eq!(r.decimation, 1);
        assert_eq!(r.scheme, Scheme::Matching);
        let r2 = ScenarioConfig::from_json_str("{}").unwrap().resolve().unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn eps_plus_min_rule() {
        let c = ScenarioConfig {
            eps_minus: Some(1e-6),
            ..Default::default()
        };
        let r = c.resolve().unwrap();
        assert_eq!(r.eps_plus, (1e-1f64).min(1e3 * 1e-6));
        assert!((r.eps_plus - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn inadmissible_eps_plus_names_key_and_bound() {
        let c: ScenarioConfig =
            ScenarioConfig::from_json_str(r#"{"alpha": 0.25, "eps_plus": 0.1}"#).unwrap();
        match c.resolve() {
            Err(ConfigError::Invalid { key, message }) => {
                assert_eq!(key, "eps_plus");
                assert!(message.contains("0.0625"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ScenarioConfig::from_json_str(r#"{"alpah": 0.5}"#).is_err());
        assert!(ScenarioConfig::from_json_str("{not json").is_err());
    }

    #[test]
    fn preset_and_single_layer() {
        let c: ScenarioConfig = ScenarioConfig::from_json_str(
            r#"{"preset": "reduced-amplitude", "n_layers": 1, "eps_minus": 0.1}"#,
        )
        .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.disturbance_amplitude, 10.0);
        assert_eq!(r.widths, vec![0.1]);

        let bad = ScenarioConfig {
            n_layers: Some(1),
            eps_plus: Some(0.2),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn alpha_above_one_warns() {
        let c = ScenarioConfig {
            alpha: Some(1.2),
            eps_minus: Some(1e-4),
            eps_plus: Some(1e-2),
            ..Default::default()
        };
        let r = c.resolve().unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn auto_decimation() {
        let c = ScenarioConfig {
            duration: Some(30.0),
            ..Default::default()
        };
        assert_eq!(c.resolve().unwrap().decimation, 10);
    }

    #[test]
    fn scenario_matches_resolution() {
        let r = ScenarioConfig::default().resolve().unwrap();
        let scn = r.scenario();
        assert_eq!(scn.sample_count(), r.samples);
        assert_eq!(scn.cfg.ladder.widths(), &r.widths[..]);
        assert_eq!(scn.cfg.limits.s_floor, 1e-12);
    }
}

//! Run metrics and the parameter-sweep harness.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::barrier::BarrierLadder;
use crate::config::{ConfigError, ResolvedConfig, ScenarioConfig};
use crate::discretization::Scheme;
use crate::io::TraceWriter;
use crate::plant::{simulate, StepRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics of an empty trace")]
    EmptyTrace,
    #[error("window fraction must lie in (0, 1], got {0}")]
    BadWindow(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub samples: u64,
    pub window_fraction: f64,
    /// Max `|s|` over the steady-state window.
    pub max_s_ss: f64,
    pub rms_tracking_ss: f64,
    /// Fraction of window samples with `|s| <= eps_1`.
    pub inner_fraction: f64,
    /// Window fraction spent in `A0, A1, ..., AN`.
    pub occupancy: Vec<f64>,
    /// Layer changes over the whole run.
    pub switch_count: u64,
    /// `sum |u_{k+1} - u_k|` over the window divided by its duration.
    pub chatter_index: f64,
}

impl RunMetrics {
    pub fn innermost_occupancy(&self) -> f64 {
        self.occupancy[1]
    }

    pub fn outermost_occupancy(&self) -> f64 {
        self.occupancy[self.occupancy.len() - 1]
    }
}

/// Streaming metrics over a trace whose length is known up front.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    total: u64,
    window_start: u64,
    window_fraction: f64,
    eps_inner: f64,
    seen: u64,
    prev_layer: Option<u32>,
    prev_u: Option<f64>,
    switches: u64,
    max_s: f64,
    sum_sq: f64,
    inner: u64,
    layer_counts: Vec<u64>,
    chatter_sum: f64,
    t_first: f64,
    t_last: f64,
}

impl MetricsAccumulator {
    pub fn new(
        ladder: &BarrierLadder,
        total: u64,
        window_fraction: f64,
    ) -> Result<Self, MetricsError> {
        if total == 0 {
            return Err(MetricsError::EmptyTrace);
        }
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(MetricsError::BadWindow(window_fraction));
        }
        let len = ((total as f64 * window_fraction).ceil() as u64).clamp(1, total);
        Ok(Self {
            total,
            window_start: total - len,
            window_fraction,
            eps_inner: ladder.inner(),
            seen: 0,
            prev_layer: None,
            prev_u: None,
            switches: 0,
            max_s: 0.0,
            sum_sq: 0.0,
            inner: 0,
            layer_counts: vec![0; ladder.len() + 1],
            chatter_sum: 0.0,
            t_first: 0.0,
            t_last: 0.0,
        })
    }

    pub fn push(&mut self, r: &StepRecord) {
        if let Some(prev) = self.prev_layer {
            if prev != r.layer {
                self.switches += 1;
            }
        }
        self.prev_layer = Some(r.layer);

        if self.seen >= self.window_start {
            let s = r.s.abs();
            self.max_s = self.max_s.max(s);
            self.sum_sq += r.s * r.s;
            if s <= self.eps_inner {
                self.inner += 1;
            }
            let slot = (r.layer as usize).min(self.layer_counts.len() - 1);
            self.layer_counts[slot] += 1;
            match self.prev_u {
                Some(prev) => self.chatter_sum += (r.u - prev).abs(),
                None => self.t_first = r.t,
            }
            self.prev_u = Some(r.u);
            self.t_last = r.t;
        }
        self.seen += 1;
    }

    pub fn finish(self) -> Result<RunMetrics, MetricsError> {
        if self.seen == 0 {
            return Err(MetricsError::EmptyTrace);
        }
        let n = self.seen.saturating_sub(self.window_start).max(1) as f64;
        let span = self.t_last - self.t_first;
        Ok(RunMetrics {
            samples: self.seen,
            window_fraction: self.window_fraction,
            max_s_ss: self.max_s,
            rms_tracking_ss: (self.sum_sq / n).sqrt(),
            inner_fraction: self.inner as f64 / n,
            occupancy: self.layer_counts.iter().map(|&c| c as f64 / n).collect(),
            switch_count: self.switches,
            chatter_index: if span > 0.0 { self.chatter_sum / span } else { 0.0 },
        })
    }

    pub fn expected_samples(&self) -> u64 {
        self.total
    }
}

pub fn compute_metrics(
    trace: &[StepRecord],
    ladder: &BarrierLadder,
    window_fraction: f64,
) -> Result<RunMetrics, MetricsError> {
    let mut acc = MetricsAccumulator::new(ladder, trace.len() as u64, window_fraction)?;
    for r in trace {
        acc.push(r);
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    EpsMinus,
    EpsPlus,
    Ts,
    NLayers,
    Amplitude,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::EpsMinus => "eps_minus",
            SweepParam::EpsPlus => "eps_plus",
            SweepParam::Ts => "ts",
            SweepParam::NLayers => "n_layers",
            SweepParam::Amplitude => "disturbance_amplitude",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepParam::Alpha => cfg.alpha = Some(value),
            SweepParam::EpsMinus => cfg.eps_minus = Some(value),
            SweepParam::EpsPlus => cfg.eps_plus = Some(value),
            SweepParam::Ts => cfg.ts = Some(value),
            SweepParam::NLayers => cfg.n_layers = Some(value as usize),
            SweepParam::Amplitude => cfg.disturbance_amplitude = Some(value),
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "alpha" => SweepParam::Alpha,
            "eps_minus" | "eps-" => SweepParam::EpsMinus,
            "eps_plus" | "eps+" => SweepParam::EpsPlus,
            "Ts" | "ts" => SweepParam::Ts,
            "N" | "n" | "n_layers" => SweepParam::NLayers,
            "amplitude" | "A" | "disturbance_amplitude" => SweepParam::Amplitude,
            other => return Err(format!("unknown sweep axis '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parses `name=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let (name, values) = spec
            .split_once('=')
            .ok_or_else(|| format!("axis '{spec}' must look like name=v1,v2,..."))?;
        let param: SweepParam = name.trim().parse()?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("axis {name}: bad value '{v}': {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(format!("axis {name} has no values"));
        }
        if param == SweepParam::NLayers
            && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
        {
            return Err(format!("axis {name} needs positive integers"));
        }
        Ok(Self { param, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Each axis varied alone around the base configuration.
    #[default]
    OneAtATime,
    Cartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub base: ScenarioConfig,
    pub axes: Vec<SweepAxis>,
    pub mode: SweepMode,
}

pub type GridPoint = Vec<(SweepParam, f64)>;

impl SweepGrid {
    pub fn points(&self) -> Vec<GridPoint> {
        match self.mode {
            SweepMode::OneAtATime => self
                .axes
                .iter()
                .flat_map(|axis| axis.values.iter().map(move |&v| vec![(axis.param, v)]))
                .collect(),
            SweepMode::Cartesian => {
                let mut points: Vec<GridPoint> = vec![Vec::new()];
                for axis in &self.axes {
                    points = points
                        .into_iter()
                        .flat_map(|p| {
                            axis.values.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push((axis.param, v));
                                q
                            })
                        })
                        .collect();
                }
                if self.axes.is_empty() {
                    Vec::new()
                } else {
                    points
                }
            }
        }
    }

    pub fn config_for(&self, point: &GridPoint) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        for &(param, value) in point {
            param.apply(&mut cfg, value);
        }
        cfg
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// When set, each point's trace goes to `<dir>/point_<index>/trace.csv`.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<(String, f64)>,
    pub resolved: Option<ResolvedConfig>,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] crate::plant::SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

/// Simulates a resolved configuration, computing metrics while streaming.
pub fn run_resolved(
    resolved: &ResolvedConfig,
    scheme: Scheme,
    mut writer: Option<&mut TraceWriter>,
) -> Result<RunMetrics, RunError> {
    let scn = resolved.scenario();
    let mut acc = MetricsAccumulator::new(&scn.cfg.ladder, scn.sample_count(), resolved.window_fraction)?;
    let mut io_err = None;
    simulate(&scn, scheme, |r| {
        acc.push(r);
        if let Some(w) = writer.as_deref_mut() {
            if io_err.is_none() {
                if let Err(e) = w.push(r) {
                    io_err = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    Ok(acc.finish()?)
}

fn run_point(
    grid: &SweepGrid,
    index: usize,
    point: &GridPoint,
    scheme: Scheme,
    opts: &SweepOptions,
) -> SweepRow {
    let params = point
        .iter()
        .map(|&(p, v)| (p.name().to_string(), v))
        .collect();
    let mut row = SweepRow {
        index,
        params,
        resolved: None,
        metrics: None,
        error: None,
    };
    let resolved = match grid.config_for(point).resolve() {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let result = match &opts.trace_dir {
        Some(dir) => {
            let path = dir.join(format!("point_{index:03}")).join("trace.csv");
            TraceWriter::create(&path, resolved.decimation)
                .map_err(RunError::from)
                .and_then(|mut w| {
                    let m = run_resolved(&resolved, scheme, Some(&mut w))?;
                    w.finish()?;
                    Ok(m)
                })
        }
        None => run_resolved(&resolved, scheme, None),
    };
    match result {
        Ok(m) => row.metrics = Some(m),
        Err(e) => row.error = Some(e.to_string()),
    }
    row.resolved = Some(resolved);
    row
}

/// One row per grid point, in grid order. Points run in parallel; a point
/// whose configuration is rejected yields an error row.
pub fn run_sweep(grid: &SweepGrid, scheme: Scheme, opts: &SweepOptions) -> Vec<SweepRow> {
    let points = grid.points();
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_point(grid, i, p, scheme, opts))
        .collect()
}

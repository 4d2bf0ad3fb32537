//! Command-line surface: `simulate`, `sweep`, `validate`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::config::{ResolvedConfig, ScenarioConfig};
use crate::discretization::Scheme;
use crate::experiments::{run_resolved, run_sweep, SweepAxis, SweepGrid, SweepMode, SweepOptions};
use crate::io::{emit_metrics, emit_sweep, write_json, Manifest, TraceWriter};

/// Overrides the sweep worker count.
pub const WORKERS_ENV: &str = "NESTED_STA_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "nested-sta", version, about = "Multi-layer barrier super-twisting controller simulator")]
struct Cli {
    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Matching,
    Euler,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Matching => Scheme::Matching,
            SchemeArg::Euler => Scheme::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    OneAtATime,
    Cartesian,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop scenario
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        out: PathBuf,
        /// Keep every n-th trace row (metrics always use every sample)
        #[arg(long)]
        decimation: Option<u64>,
    },
    /// Run a parameter sweep around a base configuration
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// name=v1,v2,... (alpha, eps_minus, eps_plus, Ts, N, amplitude)
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, value_enum, default_value = "one-at-a-time")]
        mode: ModeArg,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        out: PathBuf,
        /// Also write every point's trace
        #[arg(long)]
        traces: bool,
    },
    /// Resolve and check a configuration without running it
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn load(config: Option<&Path>) -> Result<ScenarioConfig, Box<dyn std::error::Error>> {
    Ok(match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    })
}

fn report_warnings(resolved: &ResolvedConfig) {
    for w in &resolved.warnings {
        warn!("{w}");
    }
}

fn simulate(
    config: Option<&Path>,
    scheme: Option<SchemeArg>,
    out: &Path,
    decimation: Option<u64>,
) -> CliResult {
    let started = Instant::now();
    let mut cfg = load(config)?;
    if decimation.is_some() {
        cfg.decimation = decimation;
    }
    if let Some(s) = scheme {
        cfg.scheme = Some(s.into());
    }
    let resolved = cfg.resolve()?;
    report_warnings(&resolved);
    let scheme = resolved.scheme;
    info!(
        "simulating {} samples (Ts = {}, N = {}, scheme = {scheme})",
        resolved.samples, resolved.ts, resolved.n_layers
    );

    let trace_path = out.join("trace.csv");
    let mut writer = TraceWriter::create(&trace_path, resolved.decimation)?;
    let metrics = run_resolved(&resolved, scheme, Some(&mut writer))?;
    let rows = writer.finish()?;
    emit_metrics(&metrics, out)?;
    info!(
        "max |s| (steady state) = {:e}, switches = {}",
        metrics.max_s_ss, metrics.switch_count
    );

    let mut manifest = Manifest::new("simulate", scheme);
    manifest.config = Some(resolved);
    manifest.rows_written = Some(rows);
    manifest.outputs = ["trace.csv", "metrics.json", "metrics.csv", "manifest.json"]
        .iter()
        .map(|f| out.join(f).display().to_string())
        .collect();
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    write_json(&manifest, &out.join("manifest.json"))?;
    Ok(())
}

fn sweep(
    config: Option<&Path>,
    axes: &[String],
    mode: ModeArg,
    scheme: Option<SchemeArg>,
    out: &Path,
    traces: bool,
) -> CliResult {
    let started = Instant::now();
    let base = load(config)?;
    // the base itself must be valid even if some grid points are not
    let base_resolved = base.resolve()?;
    report_warnings(&base_resolved);
    let scheme = scheme.map(Scheme::from).unwrap_or(base_resolved.scheme);
    let axes = axes
        .iter()
        .map(|a| SweepAxis::parse(a))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = SweepGrid {
        base,
        axes,
        mode: match mode {
            ModeArg::OneAtATime => SweepMode::OneAtATime,
            ModeArg::Cartesian => SweepMode::Cartesian,
        },
    };
    let opts = SweepOptions {
        trace_dir: traces.then(|| out.to_path_buf()),
    };
    info!("sweeping {} grid points", grid.points().len());
    let rows = run_sweep(&grid, scheme, &opts);
    for row in &rows {
        match (&row.metrics, &row.error) {
            (Some(m), _) => info!("point {} {:?}: max |s| = {:e}", row.index, row.params, m.max_s_ss),
            (None, Some(e)) => warn!("point {} {:?} failed: {e}", row.index, row.params),
            _ => {}
        }
    }
    emit_sweep(&rows, out)?;

    let mut manifest = Manifest::new("sweep", scheme);
    manifest.config = Some(base_resolved);
    manifest.sweep = Some(serde_json::to_value(&grid)?);
    manifest.outputs = ["summary.csv", "summary.json", "manifest.json"]
        .iter()
        .map(|f| out.join(f).display().to_string())
        .collect();
    if traces {
        manifest
            .outputs
            .extend((0..rows.len()).map(|i| out.join(format!("point_{i:03}/trace.csv")).display().to_string()));
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    write_json(&manifest, &out.join("manifest.json"))?;
    Ok(())
}

fn validate(config: Option<&Path>) -> CliResult {
    let resolved = load(config)?.resolve()?;
    report_warnings(&resolved);
    println!("{}", serde_json::to_string_pretty(&resolved)?);
    Ok(())
}

fn init_workers() {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                // only fails if a global pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => warn!("ignoring {WORKERS_ENV}={v}: expected a positive integer"),
        }
    }
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    init_workers();

    let result = match &cli.command {
        Command::Simulate {
            config,
            scheme,
            out,
            decimation,
        } => simulate(config.as_deref(), *scheme, out, *decimation),
        Command::Sweep {
            config,
            axes,
            mode,
            scheme,
            out,
            traces,
        } => sweep(config.as_deref(), axes, *mode, *scheme, out, *traces),
        Command::Validate { config } => validate(config.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

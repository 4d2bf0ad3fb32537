//! Trace, metrics and manifest files.
//!
//! Floats are written with the shortest representation that parses back to
//! the same `f64`, so traces re-read bit-exactly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::ResolvedConfig;
use crate::discretization::Scheme;
use crate::experiments::{RunMetrics, SweepRow};
use crate::plant::StepRecord;

pub const TRACE_HEADER: &str = "t,x,x_ref,s,u,v,layer,k1,k2,d,phi";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_record(out: &mut impl Write, r: &StepRecord) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        format_f64(r.t),
        format_f64(r.x),
        format_f64(r.x_ref),
        format_f64(r.s),
        format_f64(r.u),
        format_f64(r.v),
        r.layer,
        format_f64(r.k1),
        format_f64(r.k2),
        format_f64(r.d),
        format_f64(r.phi),
    )
}

/// Streaming trace CSV writer; keeps every `decimation`-th sample.
pub struct TraceWriter {
    out: BufWriter<File>,
    path: PathBuf,
    decimation: u64,
    seen: u64,
    written: u64,
}

impl TraceWriter {
    pub fn create(path: &Path, decimation: u64) -> Result<Self, IoError> {
        let mut out = create(path)?;
        writeln!(out, "{TRACE_HEADER}").map_err(io_err(path))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
            decimation: decimation.max(1),
            seen: 0,
            written: 0,
        })
    }

    pub fn push(&mut self, r: &StepRecord) -> Result<(), IoError> {
        if self.seen % self.decimation == 0 {
            write_record(&mut self.out, r).map_err(io_err(&self.path))?;
            self.written += 1;
        }
        self.seen += 1;
        Ok(())
    }

    /// Flushes and returns the number of rows written.
    pub fn finish(mut self) -> Result<u64, IoError> {
        self.out.flush().map_err(io_err(&self.path))?;
        Ok(self.written)
    }
}

pub fn emit_trace(trace: &[StepRecord], path: &Path, decimation: u64) -> Result<u64, IoError> {
    let mut w = TraceWriter::create(path, decimation)?;
    for r in trace {
        w.push(r)?;
    }
    w.finish()
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let fmt = |line: usize, message: String| IoError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    match lines.next() {
        Some(h) => {
            let h = h.map_err(io_err(path))?;
            if h != TRACE_HEADER {
                return Err(fmt(1, format!("unexpected header '{h}'")));
            }
        }
        None => return Err(fmt(1, "missing header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let lineno = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(fmt(lineno, format!("expected 11 columns, found {}", cols.len())));
        }
        let f = |j: usize| {
            cols[j]
                .parse::<f64>()
                .map_err(|e| fmt(lineno, format!("column {j}: {e}")))
        };
        out.push(StepRecord {
            t: f(0)?,
            x: f(1)?,
            x_ref: f(2)?,
            s: f(3)?,
            u: f(4)?,
            v: f(5)?,
            layer: cols[6]
                .parse()
                .map_err(|e| fmt(lineno, format!("layer: {e}")))?,
            k1: f(7)?,
            k2: f(8)?,
            d: f(9)?,
            phi: f(10)?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

const METRICS_COLUMNS: &str =
    "samples,window_fraction,max_s_ss,rms_tracking_ss,inner_fraction,switch_count,chatter_index";

fn metrics_fields(m: &RunMetrics) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{}",
        m.samples,
        format_f64(m.window_fraction),
        format_f64(m.max_s_ss),
        format_f64(m.rms_tracking_ss),
        format_f64(m.inner_fraction),
        m.switch_count,
        format_f64(m.chatter_index),
    );
    for o in &m.occupancy {
        s.push(',');
        s.push_str(&format_f64(*o));
    }
    s
}

fn occupancy_header(layers: usize) -> String {
    (0..layers).map(|i| format!(",occ_a{i}")).collect()
}

/// Writes `metrics.json` and `metrics.csv` into `dir`.
pub fn emit_metrics(m: &RunMetrics, dir: &Path) -> Result<(), IoError> {
    write_json(m, &dir.join("metrics.json"))?;
    let path = dir.join("metrics.csv");
    let mut out = create(&path)?;
    writeln!(out, "{METRICS_COLUMNS}{}", occupancy_header(m.occupancy.len()))
        .and_then(|_| writeln!(out, "{}", metrics_fields(m)))
        .and_then(|_| out.flush())
        .map_err(io_err(&path))
}

/// Writes `summary.json` and `summary.csv` for a sweep.
///
/// The CSV carries one column per swept parameter; occupancy columns are
/// sized for the largest ladder in the sweep and padded with empty cells.
pub fn emit_sweep(rows: &[SweepRow], dir: &Path) -> Result<(), IoError> {
    write_json(&rows, &dir.join("summary.json"))?;
    let path = dir.join("summary.csv");
    let mut out = create(&path)?;
    let mut names: Vec<&str> = Vec::new();
    for row in rows {
        for (n, _) in &row.params {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let max_occ = rows
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| m.occupancy.len()))
        .max()
        .unwrap_or(0);
    let mut header = String::from("index");
    for n in &names {
        header.push(',');
        header.push_str(n);
    }
    header.push(',');
    header.push_str(METRICS_COLUMNS);
    header.push_str(&occupancy_header(max_occ));
    header.push_str(",error");
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{header}")?;
        for row in rows {
            let mut line = row.index.to_string();
            for n in &names {
                line.push(',');
                if let Some((_, v)) = row.params.iter().find(|(p, _)| p == n) {
                    line.push_str(&format_f64(*v));
                }
            }
            match &row.metrics {
                Some(m) => {
                    line.push(',');
                    line.push_str(&metrics_fields(m));
                    for _ in m.occupancy.len()..max_occ {
                        line.push(',');
                    }
                    line.push(',');
                }
                None => {
                    line.push_str(&",".repeat(7 + max_occ));
                    line.push(',');
                    let msg = row.error.as_deref().unwrap_or("").replace('"', "'");
                    line.push('"');
                    line.push_str(&msg);
                    line.push('"');
                }
            }
            writeln!(out, "{line}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(&path))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub scheme: Scheme,
    pub config: Option<ResolvedConfig>,
    pub sweep: Option<serde_json::Value>,
    pub outputs: Vec<String>,
    pub rows_written: Option<u64>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, scheme: Scheme) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            scheme,
            config: None,
            sweep: None,
            outputs: Vec::new(),
            rows_written: None,
            wall_clock_seconds: 0.0,
        }
    }
}

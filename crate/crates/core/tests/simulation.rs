use nested_sta::barrier::{validate_ladder, BarrierLadder};
use nested_sta::config::{Preset, ScenarioConfig};
use nested_sta::discretization::Scheme;
use nested_sta::experiments::{
    compute_metrics, run_sweep, SweepAxis, SweepGrid, SweepMode, SweepOptions,
};
use nested_sta::io::read_trace;
use nested_sta::plant::{integrate_interval, run_closed_loop, DisturbanceSpec, StepRecord};

fn short(duration: f64, ts: f64) -> ScenarioConfig {
    ScenarioConfig {
        preset: Some(Preset::ReducedAmplitude),
        duration: Some(duration),
        ts: Some(ts),
        ..Default::default()
    }
}

fn record(k: u64, s: f64, u: f64, layer: u32) -> StepRecord {
    StepRecord {
        t: k as f64 * 1e-3,
        x: s,
        x_ref: 0.0,
        s,
        u,
        v: 0.0,
        layer,
        k1: 0.0,
        k2: 0.0,
        d: 0.0,
        phi: 0.0,
    }
}

fn ladder() -> BarrierLadder {
    validate_ladder(&[1e-4, 1e-1], 0.5).unwrap()
}

#[test]
fn constant_trace_inside_inner_barrier() {
    let trace: Vec<_> = (0..100).map(|k| record(k, 5e-5, 2.0, 1)).collect();
    let m = compute_metrics(&trace, &ladder(), 0.5).unwrap();
    assert_eq!(m.innermost_occupancy(), 1.0);
    assert_eq!(m.switch_count, 0);
    assert_eq!(m.chatter_index, 0.0);
    assert_eq!(m.inner_fraction, 1.0);
}

#[test]
fn alternating_layers_switch_every_sample() {
    let trace: Vec<_> = (0..101).map(|k| record(k, 0.0, 0.0, 1 + (k % 2) as u32)).collect();
    let m = compute_metrics(&trace, &ladder(), 0.5).unwrap();
    assert_eq!(m.switch_count, 100);
}

#[test]
fn empty_trace_is_rejected() {
    assert!(compute_metrics(&[], &ladder(), 0.5).is_err());
}

#[test]
fn sample_times_are_exact_multiples() {
    let r = short(0.05, 1e-4).resolve().unwrap();
    let trace = run_closed_loop(&r.scenario(), Scheme::Matching).unwrap();
    assert_eq!(trace.len() as u64, r.samples);
    for (k, rec) in trace.iter().enumerate() {
        assert_eq!(rec.t, k as f64 * 1e-4);
    }
}

#[test]
fn doubling_substeps_barely_moves_the_samples() {
    let base = short(0.2, 1e-3).resolve().unwrap();
    let mut scn = base.scenario();
    let coarse = run_closed_loop(&scn, Scheme::Matching).unwrap();
    scn.substeps *= 2;
    let fine = run_closed_loop(&scn, Scheme::Matching).unwrap();
    for (a, b) in coarse.iter().zip(&fine) {
        let scale = a.x.abs().max(1e-6);
        assert!((a.x - b.x).abs() <= 1e-8 * scale, "t = {}: {} vs {}", a.t, a.x, b.x);
    }
}

#[test]
fn disturbance_acts_between_samples() {
    // zero hold, sinusoidal disturbance: the state moves away from the sample
    // value inside the interval even though it returns close to it
    let d = DisturbanceSpec::sinusoid(1e3, 15.0);
    let ts = 1e-3;
    let t0 = 0.5 * std::f64::consts::PI / 15.0 - 0.5 * ts;
    let mid = integrate_interval(0.0, 0.0, t0, 0.5 * ts, 50, &d);
    assert!(mid.abs() > 0.0);
    let exact = d.integral(t0, 0.5 * ts);
    assert!((mid - exact).abs() <= 1e-10 * exact.abs());
}

#[test]
fn startup_from_outside_the_ladder_enters_a0() {
    let cfg = ScenarioConfig {
        x0: Some(0.2),
        ..short(0.01, 1e-4)
    };
    let r = cfg.resolve().unwrap();
    let trace = run_closed_loop(&r.scenario(), Scheme::Matching).unwrap();
    assert_eq!(trace[0].layer, 0);
    assert!(trace[1].k1 >= trace[0].k1);
}

#[test]
fn traces_written_by_a_sweep_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid {
        base: short(0.02, 1e-3),
        axes: vec![SweepAxis::parse("N=2,3").unwrap()],
        mode: SweepMode::OneAtATime,
    };
    let opts = SweepOptions {
        trace_dir: Some(dir.path().to_path_buf()),
    };
    let rows = run_sweep(&grid, Scheme::Matching, &opts);
    for row in &rows {
        let trace = read_trace(&dir.path().join(format!("point_{:03}/trace.csv", row.index))).unwrap();
        assert_eq!(trace.len() as u64, row.metrics.as_ref().unwrap().samples);
    }
}

#[test]
fn sweep_rows_are_deterministic_and_counted() {
    let grid = SweepGrid {
        base: short(0.05, 1e-3),
        axes: vec![
            SweepAxis::parse("alpha=0.25,0.5,0.75,1").unwrap(),
            SweepAxis::parse("N=2,5").unwrap(),
        ],
        mode: SweepMode::OneAtATime,
    };
    let a = run_sweep(&grid, Scheme::Matching, &SweepOptions::default());
    let b = run_sweep(&grid, Scheme::Matching, &SweepOptions::default());
    assert_eq!(a.len(), 6);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.index, i);
    }

    let cart = SweepGrid {
        mode: SweepMode::Cartesian,
        ..grid
    };
    assert_eq!(cart.points().len(), 8);
}

#[test]
fn rejected_point_is_an_error_row() {
    // eps_plus = 0.1 is outside the admissibility bound 4^(-2) for alpha = 1/4
    let grid = SweepGrid {
        base: short(0.02, 1e-3),
        axes: vec![SweepAxis::parse("alpha=0.25,0.5").unwrap()],
        mode: SweepMode::OneAtATime,
    };
    let rows = run_sweep(&grid, Scheme::Matching, &SweepOptions::default());
    assert_eq!(rows.len(), 2);
    assert!(rows[0].error.as_deref().unwrap().contains("eps_plus"));
    assert!(rows[0].metrics.is_none());
    assert!(rows[1].metrics.is_some());
}

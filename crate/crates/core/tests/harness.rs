use std::f64::consts::PI;

use weylband::config::ScenarioConfig;
use weylband::harness::{emit_outputs, montecarlo_volume_check, run_scenario, sweep_h, Stages};
use weylband::par::Execution;
use weylband::profile::{Observable, SurfaceProfile};
use weylband::weylvol::{admissible_set, band_volume, AdmissibleConfig, AdmissibleSet};
use weylband::Error;

fn config(extra: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(&format!(
        r#"
[surface]
family = "sphere"

[observable]
kind = "cos2s"

[band]
e2 = 0.9
e4 = 1.1
f3 = 0.2
f1 = 0.4
eps = "h^0.5"

[numerics]
h_list = [0.1, 0.07, 0.05]
grid_n = 256
{extra}
"#
    ))
    .unwrap()
}

#[test]
fn monte_carlo_agrees_with_reduced_volume() {
    let p = SurfaceProfile::sphere();
    let full = AdmissibleSet::full(p.f_max);
    let banded = admissible_set(&p, &Observable::Cos2s, 0.2, 0.4, &AdmissibleConfig::default(), Execution::Parallel).unwrap();
    for (set, expected) in [(full, 0.8 * PI * PI), (banded, 2.5849)] {
        let volume = band_volume(&p, &set, 0.9, 1.1, 1e-12).unwrap();
        assert!((volume - expected).abs() < 1e-4, "{volume}");
        let mc = montecarlo_volume_check(&p, &set, 0.9, 1.1, 10_000_000, 11, Execution::Parallel).unwrap();
        assert!(
            (mc.estimate - volume).abs() <= 3.0 * mc.stderr,
            "{} +- {} vs {volume}",
            mc.estimate,
            mc.stderr
        );
    }
}

#[test]
fn band_above_the_averages_is_empty() {
    let mut cfg = config("");
    cfg.band.f3 = 0.6;
    cfg.band.f1 = 0.8;
    let run = run_scenario(&cfg, Stages::all(), Execution::Parallel).unwrap();
    for row in &run.report.rows {
        assert_eq!(row.n_quantum, 0);
        assert_eq!(row.n_lattice, 0);
        assert_eq!(row.n_pred, 0.0);
    }
    assert_eq!(run.report.admissible_measure, Some(0.0));
}

#[test]
fn reports_are_identical_across_execution_policies() {
    let cfg = config("mc_samples = 200000");
    let a = run_scenario(&cfg, Stages::all(), Execution::Sequential).unwrap();
    let b = run_scenario(&cfg, Stages::all(), Execution::Parallel).unwrap();
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
    let rows = &a.report.rows;
    assert_eq!(rows.len(), 3);
    for r in rows {
        let expect = (r.n_quantum as f64 - r.n_pred).abs() / r.n_pred.max(1.0);
        assert_eq!(r.rel_err_quantum_vs_pred, expect);
    }
    assert!(a.report.trend.is_some());
}

#[test]
fn sweep_needs_three_values() {
    let mut cfg = config("");
    cfg.numerics.h_list = vec![0.05];
    let run = run_scenario(&cfg, Stages { strip: false, ..Stages::all() }, Execution::Parallel).unwrap();
    assert!(run.report.trend.is_none());
    assert!(matches!(sweep_h(&run.report), Err(Error::InvalidInput(_))));
}

#[test]
fn failure_keeps_the_partial_report() {
    let mut cfg = config("");
    cfg.observable.kind = "theta_coupled".into();
    cfg.observable.base = Some("cos2s".into());
    cfg.observable.coupling = Some("cos_s".into());
    cfg.observable.params.insert("eta".into(), 0.1);

    // On the sphere every torus is closed and the coupling spreads the limit
    // intervals of the flow averages, so the level F3 sits inside one.
    let failure = run_scenario(&cfg, Stages::all(), Execution::Parallel).unwrap_err();
    assert!(matches!(failure.error, Error::LevelHitsSingularLeaf { .. }), "{}", failure.error);

    let stages = Stages {
        prediction: false,
        montecarlo: false,
        ..Stages::all()
    };
    let failure = run_scenario(&cfg, stages, Execution::Parallel).unwrap_err();
    assert!(matches!(failure.error, Error::NonSeparableObservable), "{}", failure.error);
    // The classical table was finished before the quantum solve.
    assert_eq!(failure.partial.report.classical_rows, 33);
    assert!(failure.partial.report.rows.is_empty());
    assert!(failure.partial.report.failure.is_some());

    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&failure.partial, dir.path()).unwrap();
    assert!(files.iter().any(|f| f.ends_with("report.json")));
    assert!(files.iter().any(|f| f.ends_with("classical.csv")));
}

#[test]
fn outputs_match_the_report() {
    let cfg = config("");
    let run = run_scenario(&cfg, Stages::all(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&run, dir.path()).unwrap();
    let row = run.report.rows.last().unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("spectrum.csv")).unwrap();
    let inside = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| {
            let re: f64 = r[2].parse().unwrap();
            let y: f64 = r[4].parse().unwrap();
            re > 0.9 && re < 1.1 && y > 0.2 && y < 0.4
        })
        .count();
    assert_eq!(inside, row.n_quantum);
    let lattice = std::fs::read_to_string(dir.path().join("lattice.csv")).unwrap();
    assert!(lattice.starts_with("k,m,re_z,im_z_over_eps,a\n"));
    let pred: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("prediction.json")).unwrap()).unwrap();
    assert!(pred["admissible"]["intervals"].is_array());
    assert!(pred["admissible"]["crossings"][0]["derivative"].is_number());
}

#[test]
fn unwritable_path_is_an_io_failure() {
    let run = run_scenario(&config(""), Stages::none(), Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("f");
    std::fs::write(&blocker, "x").unwrap();
    assert!(matches!(emit_outputs(&run, &blocker.join("out")), Err(Error::Io { .. })));
}

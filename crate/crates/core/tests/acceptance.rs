//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use weylband::classical::{action_iota, classical_table, ClassicalConfig};
use weylband::config::ScenarioConfig;
use weylband::harness::{montecarlo_volume_check, run_scenario, ScenarioRun, Stages};
use weylband::par::Execution;
use weylband::profile::{area, Observable, SurfaceProfile};
use weylband::quad::TanhSinh;
use weylband::quantum::{
    assemble_spectrum, count_eigenfrequencies, damped_prediction, damped_wave_modes, damped_wave_spectrum,
    DampedConfig, SpectrumConfig,
};
use weylband::weylvol::{admissible_set, band_volume, bohr_sommerfeld_spectrum, AdmissibleConfig};
use weylband::Error;

const EXEC: Execution = Execution::Parallel;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(surface: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(&format!(
        r#"
[surface]
{surface}

[observable]
kind = "cos2s"

[band]
e2 = 0.9
e4 = 1.1
f3 = 0.2
f1 = 0.4
eps = "h^0.5"

[numerics]
h_list = [0.08, 0.04, 0.02]
grid_n = 2048
"#
    ))
    .expect("benchmark config parses")
}

fn weyl_run(surface: &str) -> Result<ScenarioRun, String> {
    let stages = Stages {
        classical: false,
        damped: false,
        montecarlo: false,
        ..Stages::all()
    };
    run_scenario(&scenario(surface), stages, EXEC).map_err(|f| f.error.to_string())
}

/// Largest relative error against `h² ℓ(ℓ+1)` over eigenvalues with
/// `Re z ≤ 1.5`, `ℓ = |m| + index`; the constant mode is checked absolutely.
fn sphere_oracle_error(n: usize) -> Result<(f64, usize), String> {
    let h = 0.1;
    let cfg = SpectrumConfig {
        grid_n: n,
        ..SpectrumConfig::default()
    };
    let s = assemble_spectrum(&SurfaceProfile::sphere(), &Observable::Cos2s, h, 0.0, (0.0, 1.5), &cfg, EXEC)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for e in s.entries.iter().filter(|e| e.z.re <= 1.5) {
        let l = (e.m.unsigned_abs() as usize + e.index) as f64;
        let exact = h * h * l * (l + 1.0);
        if l == 0.0 {
            if e.z.norm() > 1e-10 {
                return Err(format!("constant mode at {}", e.z));
            }
        } else {
            worst = worst.max((e.z - exact).norm() / exact);
        }
        checked += 1;
    }
    Ok((worst, checked))
}

fn criterion_1() -> Outcome {
    let (e1024, count) = sphere_oracle_error(1024)?;
    let (e512, _) = sphere_oracle_error(512)?;
    let ratio = e512 / e1024;
    check(
        e1024 <= 1e-3 && (3.5..=4.5).contains(&ratio),
        format!("{count} eigenvalues, max rel err {e1024:.2e} at n=1024, n=512/n=1024 error ratio {ratio:.3}"),
    )
}

fn criterion_2(sphere: &ScenarioRun) -> Outcome {
    let row = sphere.report.rows.last().unwrap();
    let n = row.n_strip_quantum.ok_or("strip not computed")?;
    let rel = row.rel_err_strip.unwrap();
    let trend = sphere.report.trend.as_ref().ok_or("no trend")?;
    let slope = trend.slope_strip.ok_or("no strip slope")?;
    let c = trend.strip_constant.unwrap();
    check(
        n == 495 && (row.n_strip_pred - 500.0).abs() < 1e-9 && rel <= 0.02 && slope >= 0.8,
        format!(
            "h=0.02: {n} vs {:.4} (rel err {rel:.4}); fitted slope {slope:.3}, rel_err <= {c:.3} h",
            row.n_strip_pred
        ),
    )
}

fn criterion_3() -> Outcome {
    let p = SurfaceProfile::sphere();
    let table = classical_table(&p, &Observable::Cos2s, &ClassicalConfig::default(), EXEC).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in &table {
        let a = t.a;
        // The meridian a = 0 closes after one turn; ω is an integer there.
        let w_err = if a == 0.0 {
            (t.omega - t.omega.round()).abs()
        } else {
            (t.omega.abs() - 1.0).abs()
        };
        for err in [
            w_err,
            (t.iota - (1.0 - a.abs())).abs(),
            (t.j1 - PI).abs(),
            (t.q_avg - 0.5 * (1.0 - a * a)).abs(),
        ] {
            worst = worst.max(err);
        }
    }
    check(
        table.len() == 33 && worst <= 1e-8,
        format!("{} tori, worst deviation {worst:.2e}", table.len()),
    )
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, p) in [
        ("sphere", SurfaceProfile::sphere()),
        ("perturbed_sphere(0.15)", SurfaceProfile::perturbed_sphere(0.15).unwrap()),
    ] {
        let q = TanhSinh::new(1e-10);
        let iota = |a: f64| action_iota(&p, a, 1e-13).unwrap();
        let int = q.integrate(iota, -p.f_max, 0.0).map_err(|e| e.to_string())?.value
            + q.integrate(iota, 0.0, p.f_max).map_err(|e| e.to_string())?.value;
        let lhs = 4.0 * PI * PI * int;
        let rhs = PI * area(&p, 1e-13).map_err(|e| e.to_string())?;
        let rel = (lhs - rhs).abs() / rhs;
        ok &= rel <= 1e-6;
        notes.push(format!("{name}: foliation rel err {rel:.1e}"));
    }
    let p = SurfaceProfile::sphere();
    let set = admissible_set(&p, &Observable::Cos2s, 0.2, 0.4, &AdmissibleConfig::default(), EXEC)
        .map_err(|e| e.to_string())?;
    let v = band_volume(&p, &set, 0.9, 1.1, 1e-12).map_err(|e| e.to_string())?;
    ok &= (v - 2.5849).abs() <= 1e-4;
    let mc = montecarlo_volume_check(&p, &set, 0.9, 1.1, 1_000_000, 2024, EXEC).map_err(|e| e.to_string())?;
    let z = (mc.estimate - v).abs() / mc.stderr;
    ok &= z <= 3.0;
    notes.push(format!(
        "band volume {v:.6}; Monte Carlo {:.4} +- {:.4} ({z:.2} sigma)",
        mc.estimate, mc.stderr
    ));
    check(ok, notes.join("; "))
}

fn criterion_5(runs: &[(&str, &ScenarioRun, Option<f64>)]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, run, closed_form) in runs {
        let row = run.report.rows.last().unwrap();
        let target = closed_form.unwrap_or(row.n_pred);
        let q = (row.n_quantum as f64 - target).abs() / target;
        let l = (row.n_lattice as f64 - row.n_pred).abs() / row.n_pred;
        let mono = run.report.trend.as_ref().is_some_and(|t| t.quantum_monotone);
        ok &= q <= 0.10 && l <= 0.05 && mono;
        if let Some(c) = closed_form {
            ok &= (row.n_pred - c).abs() < 0.05;
        }
        let errs: Vec<String> = run
            .report
            .rows
            .iter()
            .map(|r| format!("{:.3}", r.rel_err_quantum_vs_pred))
            .collect();
        notes.push(format!(
            "{name}: quantum {} vs {:.2} ({q:.3}), lattice {} ({l:.3}), rel errs [{}]",
            row.n_quantum,
            row.n_pred,
            row.n_lattice,
            errs.join(", ")
        ));
    }
    check(ok, notes.join("; "))
}

fn criterion_6(sphere: &ScenarioRun) -> Outcome {
    let row = sphere.report.rows.last().unwrap();
    let (lo, hi) = row.im_over_eps_range.ok_or("no eigenvalues in the window")?;
    check(
        lo >= -0.02 && hi <= 0.52,
        format!("Im z/eps in [{lo:.4}, {hi:.4}] at h=0.02"),
    )
}

fn criterion_7(sphere: &ScenarioRun) -> Outcome {
    let rows = &sphere.report.rows;
    let fine = rows.last().unwrap().imag_median.ok_or("no samples")?;
    let coarse = rows[rows.len() - 2].imag_median.ok_or("no samples")?;
    check(
        fine <= 0.05 && fine <= coarse,
        format!("median residual {fine:.2e} at h=0.02, {coarse:.2e} at h=0.04"),
    )
}

fn criterion_8() -> Outcome {
    let h = 0.02;
    let lat = bohr_sommerfeld_spectrum(
        &SurfaceProfile::sphere(),
        &Observable::Cos2s,
        h,
        h.sqrt(),
        (0.5, 1.5),
        1e-6,
        1e-13,
        EXEC,
    )
    .map_err(|e| e.to_string())?;
    let mut worst_formula: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for pt in &lat.points {
        let km = pt.k as f64 + pt.m.unsigned_abs() as f64;
        let formula = h * h * (km + 0.5).powi(2);
        let exact = h * h * km * (km + 1.0);
        worst_formula = worst_formula.max((pt.re_z - formula).abs());
        worst_gap = worst_gap.max((pt.re_z - exact).abs());
    }
    check(
        !lat.points.is_empty() && worst_formula <= 1e-12 && worst_gap <= h * h / 4.0 + 1e-12,
        format!(
            "{} lattice points, max |E - h^2(k+1/2+|m|)^2| = {worst_formula:.1e}, max |E - exact| = {worst_gap:.6e} (bound {:.6e})",
            lat.points.len(),
            h * h / 4.0 + 1e-12
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = SurfaceProfile::sphere();
    let cfg = DampedConfig::default();
    let a0 = 0.3;
    let mut worst: f64 = 0.0;
    for m in [0, 7, 30] {
        let modes = damped_wave_modes(&p, &Observable::Constant { value: a0 }, m, (45.0, 55.0), &cfg)
            .map_err(|e| e.to_string())?;
        for t in &modes {
            worst = worst.max((t.tau.im - a0).abs());
        }
    }
    let obs = Observable::Cos2s;
    let modes = damped_wave_spectrum(&p, &obs, (45.0, 55.0), &cfg, EXEC).map_err(|e| e.to_string())?;
    let count = count_eigenfrequencies(&modes, 45.0, 55.0, 0.2, 0.4);
    let pred = damped_prediction(&p, &obs, (45.0, 55.0, 0.2, 0.4), &AdmissibleConfig::default(), EXEC)
        .map_err(|e| e.to_string())?;
    let rel = (count.count as f64 - pred.n_pred).abs() / pred.n_pred;
    let lo = modes.iter().map(|m| m.tau.im).fold(f64::INFINITY, f64::min);
    let hi = modes.iter().map(|m| m.tau.im).fold(f64::NEG_INFINITY, f64::max);
    check(
        worst <= 1e-8 && rel <= 0.20 && lo >= -0.02 && hi <= 0.52,
        format!(
            "constant damping |Im tau - a0| <= {worst:.1e}; box count {} vs {:.2} (rel {rel:.3}); Im tau in [{lo:.4}, {hi:.4}]",
            count.count, pred.n_pred
        ),
    )
}

fn criterion_10() -> Outcome {
    let p = SurfaceProfile::sphere();
    let cfg = AdmissibleConfig::default();
    let tangent = admissible_set(&p, &Observable::Cos2s, 0.2, 0.5, &cfg, EXEC);
    let equator = admissible_set(&p, &Observable::Cos2s, 0.0, 0.4, &cfg, EXEC);
    let t_ok = matches!(tangent, Err(Error::TangentCrossing { .. }));
    let e_ok = matches!(equator, Err(Error::LevelHitsSingularLeaf { .. }));
    let show = |r: &Result<_, Error>| match r {
        Ok(_) => "no error".to_string(),
        Err(e) => e.to_string(),
    };
    check(
        t_ok && e_ok,
        format!("F1 = 0.5: {}; F3 = q(s0) = 0: {}", show(&tangent), show(&equator)),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: BTreeMap<u32, (String, Outcome, f64)> = BTreeMap::new();
    let mut record = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.insert(id, (name.to_string(), out, t.elapsed().as_secs_f64()));
    };

    record(1, "sphere spectrum oracle", &mut criterion_1);
    record(3, "classical closed forms", &mut criterion_3);
    record(4, "volume identities", &mut criterion_4);
    record(8, "Bohr-Sommerfeld sphere identity", &mut criterion_8);
    record(9, "damped wave", &mut criterion_9);
    record(10, "failure-mode gates", &mut criterion_10);

    let t = Instant::now();
    let sphere = weyl_run("family = \"sphere\"");
    let perturbed = weyl_run("family = \"perturbed_sphere\"\nc = 0.15");
    let weyl_secs = t.elapsed().as_secs_f64();
    match (&sphere, &perturbed) {
        (Ok(s), Ok(p)) => {
            record(2, "real-part Weyl law", &mut || criterion_2(s));
            record(5, "band Weyl law", &mut || {
                criterion_5(&[("sphere", s, Some(163.7)), ("perturbed_sphere(0.15)", p, None)])
            });
            record(6, "band confinement", &mut || criterion_6(s));
            record(7, "imaginary-part correspondence", &mut || criterion_7(s));
        }
        (s, p) => {
            let why = s.as_ref().err().or(p.as_ref().err()).cloned().unwrap_or_default();
            for (id, name) in [
                (2, "real-part Weyl law"),
                (5, "band Weyl law"),
                (6, "band confinement"),
                (7, "imaginary-part correspondence"),
            ] {
                record(id, name, &mut || Err(format!("scenario failed: {why}")));
            }
        }
    }

    println!();
    let mut failed = 0;
    for (id, (name, out, secs)) in &results {
        let secs = if (2..=7).contains(id) && *id != 3 && *id != 4 { *secs + weyl_secs } else { *secs };
        match out {
            Ok(d) => println!("criterion {id:>2} PASS  {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({secs:.1}s): {d}");
            }
        }
    }
    println!(
        "\nacceptance: {} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

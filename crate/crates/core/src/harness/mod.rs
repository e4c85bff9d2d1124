//! End-to-end experiments: per-h comparison of the quantum count, the
//! Bohr–Sommerfeld lattice count and the phase-space volume prediction.

mod montecarlo;
mod output;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{classical_table, ClassicalInvariants};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::quantum::{
    assemble_spectrum, count_eigenfrequencies, count_in_rectangle, count_in_strip, damped_prediction,
    damped_wave_spectrum, imag_correspondence, DampedMode, Spectrum,
};
use crate::weylvol::{
    admissible_set, bohr_sommerfeld_spectrum, count_lattice, weyl_prediction, AdmissibleSet, BSLattice,
    WeylPrediction,
};

pub use montecarlo::{montecarlo_volume_check, MonteCarloEstimate};
pub use output::{emit_outputs, render_svg};

/// `|a − b| / max(b, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.max(1.0)
}

/// Tori with `|a|` above this fraction of `f_max` are left out of the
/// imaginary-part comparison.
pub const IMAG_A_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltStrength {
    pub exponent: f64,
    pub eps: f64,
    pub n_quantum: usize,
    pub rel_err_quantum_vs_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub h: f64,
    pub eps: f64,
    pub n_quantum: usize,
    pub n_lattice: usize,
    pub n_pred: f64,
    pub n_strip_quantum: Option<usize>,
    pub n_strip_pred: f64,
    pub rel_err_quantum_vs_pred: f64,
    pub rel_err_lattice_vs_pred: f64,
    pub rel_err_strip: Option<f64>,
    pub boundary_proximate_count: usize,
    pub excluded_equatorial_count: usize,
    /// Range of `Im z / ε` over the eigenvalues with real part in `(E2, E4)`.
    pub im_over_eps_range: Option<(f64, f64)>,
    pub imag_median: Option<f64>,
    pub imag_p90: Option<f64>,
    pub max_backward_error: f64,
    pub alt: Option<AltStrength>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampedRow {
    pub count: usize,
    pub boundary_proximate: usize,
    pub n_pred: f64,
    pub rel_err: f64,
    pub im_range: Option<(f64, f64)>,
    pub frequencies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCheck {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub band_volume: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    /// Least-squares slope of `log rel_err` against `log h`; `None` when
    /// fewer than two rows have a nonzero error.
    pub slope_quantum: Option<f64>,
    pub slope_lattice: Option<f64>,
    pub slope_strip: Option<f64>,
    /// `max rel_err / h` over the strip rows.
    pub strip_constant: Option<f64>,
    /// Quantum relative error non-increasing as `h` decreases, allowing a
    /// jitter of two eigenvalues.
    pub quantum_monotone: bool,
    pub strip_monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub config: ScenarioConfig,
    pub surface: String,
    pub volume: Option<f64>,
    pub admissible_measure: Option<f64>,
    pub rows: Vec<WeylRow>,
    pub damped: Option<DampedRow>,
    pub montecarlo: Option<MonteCarloCheck>,
    pub trend: Option<TrendSummary>,
    pub classical_rows: usize,
    /// Set when the run stopped early; rows up to the failure are kept.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowTimings {
    pub h: f64,
    pub spectrum_s: f64,
    pub strip_s: f64,
    pub lattice_s: f64,
    pub alt_s: f64,
}

/// Wall-clock times, kept out of the report so that reports are
/// reproducible bit for bit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub classical_s: f64,
    pub admissible_s: f64,
    pub rows: Vec<RowTimings>,
    pub damped_s: f64,
    pub montecarlo_s: f64,
    pub total_s: f64,
}

/// Which parts of a scenario to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub classical: bool,
    pub prediction: bool,
    pub quantum: bool,
    pub lattice: bool,
    pub strip: bool,
    pub damped: bool,
    pub montecarlo: bool,
}

impl Stages {
    pub fn all() -> Self {
        Self {
            classical: true,
            prediction: true,
            quantum: true,
            lattice: true,
            strip: true,
            damped: true,
            montecarlo: true,
        }
    }

    pub fn none() -> Self {
        Self {
            classical: false,
            prediction: false,
            quantum: false,
            lattice: false,
            strip: false,
            damped: false,
            montecarlo: false,
        }
    }
}

/// Data behind the report. Spectra and lattices are kept for the finest `h`.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub classical: Vec<ClassicalInvariants>,
    pub prediction: Option<WeylPrediction>,
    pub spectrum: Option<Spectrum>,
    pub lattice: Option<BSLattice>,
    pub damped: Vec<DampedMode>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: WeylReport,
    pub timings: Timings,
    pub artifacts: Artifacts,
}

/// A failed run with everything computed before the failure.
#[derive(Debug)]
pub struct ScenarioFailure {
    pub partial: ScenarioRun,
    pub error: Error,
}

impl std::fmt::Display for ScenarioFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for ScenarioFailure {}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn im_range<I: IntoIterator<Item = f64>>(xs: I) -> Option<(f64, f64)> {
    xs.into_iter().fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

pub fn run_scenario(
    config: &ScenarioConfig,
    stages: Stages,
    exec: Execution,
) -> std::result::Result<ScenarioRun, Box<ScenarioFailure>> {
    let start = Instant::now();
    let mut run = ScenarioRun {
        report: WeylReport {
            config: config.clone(),
            surface: config.surface.family.clone(),
            volume: None,
            admissible_measure: None,
            rows: Vec::new(),
            damped: None,
            montecarlo: None,
            trend: None,
            classical_rows: 0,
            failure: None,
        },
        timings: Timings {
            threads: par::current_threads(),
            ..Timings::default()
        },
        artifacts: Artifacts::default(),
    };
    match run_into(config, stages, exec, &mut run) {
        Ok(()) => {
            run.timings.total_s = secs(start);
            Ok(run)
        }
        Err(error) => {
            run.timings.total_s = secs(start);
            run.report.failure = Some(error.to_string());
            Err(Box::new(ScenarioFailure { partial: run, error }))
        }
    }
}

fn run_into(config: &ScenarioConfig, stages: Stages, exec: Execution, run: &mut ScenarioRun) -> Result<()> {
    config.validate()?;
    let profile = config.profile()?;
    let obs = config.observable()?;
    let quad_tol = config.numerics.quad_tol;

    if stages.classical {
        let t = Instant::now();
        run.artifacts.classical = classical_table(&profile, &obs, &config.classical(), exec)?;
        run.report.classical_rows = run.artifacts.classical.len();
        run.timings.classical_s = secs(t);
    }

    let mut set: Option<AdmissibleSet> = None;
    if stages.prediction {
        let t = Instant::now();
        let b = &config.band;
        let s = admissible_set(&profile, &obs, b.f3, b.f1, &config.admissible(), exec)?;
        run.report.admissible_measure = Some(s.measure());
        set = Some(s);
        run.timings.admissible_s = secs(t);
    }

    let spec_cfg = config.spectrum();
    let n_rows = config.numerics.h_list.len();
    for (row_idx, &h) in config.numerics.h_list.iter().enumerate() {
        let finest = row_idx + 1 == n_rows;
        let band = config.band_at(h);
        let window = (band.e2, band.e4);
        let mut tm = RowTimings { h, ..RowTimings::default() };

        let prediction = match &set {
            Some(s) => Some(weyl_prediction(&profile, s.clone(), band.e2, band.e4, h, quad_tol)?),
            None => None,
        };
        let n_pred = prediction.as_ref().map_or(0.0, |p| p.n_pred);
        let n_strip_pred = match &prediction {
            Some(p) => p.n_strip_pred,
            None => crate::weylvol::strip_prediction(&profile, band.e2, band.e4, h)?,
        };
        if let Some(p) = &prediction {
            run.report.volume = Some(p.volume);
        }

        let mut row = WeylRow {
            h,
            eps: band.eps,
            n_quantum: 0,
            n_lattice: 0,
            n_pred,
            n_strip_quantum: None,
            n_strip_pred,
            rel_err_quantum_vs_pred: 0.0,
            rel_err_lattice_vs_pred: 0.0,
            rel_err_strip: None,
            boundary_proximate_count: 0,
            excluded_equatorial_count: 0,
            im_over_eps_range: None,
            imag_median: None,
            imag_p90: None,
            max_backward_error: 0.0,
            alt: None,
        };

        if stages.quantum {
            let t = Instant::now();
            let spectrum = assemble_spectrum(&profile, &obs, h, band.eps, window, &spec_cfg, exec)?;
            let c = count_in_rectangle(&spectrum, &band);
            row.n_quantum = c.count;
            row.boundary_proximate_count += c.boundary_proximate;
            row.rel_err_quantum_vs_pred = rel_err(c.count as f64, n_pred);
            row.max_backward_error = spectrum.max_backward_error;
            if band.eps > 0.0 {
                row.im_over_eps_range = im_range(
                    spectrum
                        .entries
                        .iter()
                        .filter(|e| e.z.re > band.e2 && e.z.re < band.e4)
                        .map(|e| e.z.im / band.eps),
                );
                let ic = imag_correspondence(&spectrum, &profile, &obs, IMAG_A_FRACTION, quad_tol, exec)?;
                row.imag_median = (ic.samples > 0).then_some(ic.median);
                row.imag_p90 = (ic.samples > 0).then_some(ic.p90);
            }
            tm.spectrum_s = secs(t);
            if finest {
                run.artifacts.spectrum = Some(spectrum);
            }

            if let Some(p) = config.band.alt_eps_exponent {
                let t = Instant::now();
                let eps = h.powf(p);
                let alt = assemble_spectrum(&profile, &obs, h, eps, window, &spec_cfg, exec)?;
                let n = count_in_rectangle(&alt, &crate::weylvol::BandSpec { eps, alpha: Some(p), ..band }).count;
                row.alt = Some(AltStrength {
                    exponent: p,
                    eps,
                    n_quantum: n,
                    rel_err_quantum_vs_pred: rel_err(n as f64, n_pred),
                });
                tm.alt_s = secs(t);
            }
        }

        if stages.strip && config.numerics.strip {
            let t = Instant::now();
            let strip = assemble_spectrum(&profile, &obs, h, 0.0, window, &spec_cfg, exec)?;
            let c = count_in_strip(&strip, band.e2, band.e4);
            row.n_strip_quantum = Some(c.count);
            row.rel_err_strip = Some(rel_err(c.count as f64, n_strip_pred));
            row.max_backward_error = row.max_backward_error.max(strip.max_backward_error);
            tm.strip_s = secs(t);
        }

        if stages.lattice {
            let t = Instant::now();
            let lattice = bohr_sommerfeld_spectrum(
                &profile,
                &obs,
                h,
                band.eps,
                window,
                config.numerics.lattice_margin,
                quad_tol,
                exec,
            )?;
            let c = count_lattice(&lattice, &band);
            row.n_lattice = c.count;
            row.boundary_proximate_count += c.boundary_proximate;
            row.excluded_equatorial_count = lattice.excluded;
            row.rel_err_lattice_vs_pred = rel_err(c.count as f64, n_pred);
            tm.lattice_s = secs(t);
            if finest {
                run.artifacts.lattice = Some(lattice);
            }
        }

        if finest {
            run.artifacts.prediction = prediction;
        }
        run.report.rows.push(row);
        run.timings.rows.push(tm);
    }

    if stages.montecarlo && config.numerics.mc_samples > 0 {
        if let Some(s) = &set {
            let t = Instant::now();
            let b = &config.band;
            let est = montecarlo_volume_check(
                &profile,
                s,
                b.e2,
                b.e4,
                config.numerics.mc_samples,
                config.numerics.seed,
                exec,
            )?;
            let volume = crate::weylvol::band_volume(&profile, s, b.e2, b.e4, quad_tol)?;
            run.report.montecarlo = Some(MonteCarloCheck {
                estimate: est.estimate,
                stderr: est.stderr,
                samples: est.samples,
                band_volume: volume,
                consistent: (est.estimate - volume).abs() <= 3.0 * est.stderr,
            });
            run.timings.montecarlo_s = secs(t);
        }
    }

    if stages.damped {
        if let (Some(d), Some(damping)) = (&config.damped, config.damping()?) {
            let t = Instant::now();
            let solver = config.damped_solver();
            let modes = damped_wave_spectrum(&profile, &damping, (d.re_lo, d.re_hi), &solver, exec)?;
            let c = count_eigenfrequencies(&modes, d.re_lo, d.re_hi, d.im_lo, d.im_hi);
            let pred = damped_prediction(
                &profile,
                &damping,
                (d.re_lo, d.re_hi, d.im_lo, d.im_hi),
                &config.admissible(),
                exec,
            )?;
            run.report.damped = Some(DampedRow {
                count: c.count,
                boundary_proximate: c.boundary_proximate,
                n_pred: pred.n_pred,
                rel_err: rel_err(c.count as f64, pred.n_pred),
                im_range: im_range(modes.iter().map(|m| m.tau.im)),
                frequencies: modes.len(),
            });
            run.artifacts.damped = modes;
            run.timings.damped_s = secs(t);
        }
    }

    if config.numerics.h_list.len() >= 3 && !run.report.rows.is_empty() {
        run.report.trend = Some(sweep_h(&run.report)?);
    }
    Ok(())
}

fn loglog_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Relative errors `e_k` at decreasing `h_k` are non-increasing up to
/// `jitter` counts at each step.
fn non_increasing(errs: &[(f64, f64)], jitter: f64) -> bool {
    errs.windows(2).all(|w| w[1].0 <= w[0].0 + jitter / w[1].1.max(1.0))
}

/// Log–log trend of the relative errors over the rows of a report.
pub fn sweep_h(report: &WeylReport) -> Result<TrendSummary> {
    let rows = &report.rows;
    if rows.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "an h sweep needs at least 3 values, got {}",
            rows.len()
        )));
    }
    if rows.windows(2).any(|w| w[1].h >= w[0].h) {
        return Err(Error::InvalidInput("h values must be strictly decreasing".into()));
    }
    let q: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.rel_err_quantum_vs_pred)).collect();
    let l: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.rel_err_lattice_vs_pred)).collect();
    let strip: Option<Vec<(f64, f64)>> = rows.iter().map(|r| r.rel_err_strip.map(|e| (r.h, e))).collect();
    let q_pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.rel_err_quantum_vs_pred, r.n_pred)).collect();
    Ok(TrendSummary {
        slope_quantum: loglog_slope(&q),
        slope_lattice: loglog_slope(&l),
        slope_strip: strip.as_deref().and_then(loglog_slope),
        strip_constant: strip
            .as_ref()
            .map(|s| s.iter().map(|(h, e)| e / h).fold(0.0, f64::max)),
        quantum_monotone: non_increasing(&q_pairs, 2.0),
        strip_monotone: rows
            .iter()
            .map(|r| r.rel_err_strip.map(|e| (e, r.n_strip_pred)))
            .collect::<Option<Vec<_>>>()
            .map(|v| non_increasing(&v, 2.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.08, 0.04, 0.02].iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(0.1, 0.0), (0.05, 0.0)]), None);
    }

    #[test]
    fn jitter_tolerance() {
        // One extra count at n_pred = 100 is inside a two-count jitter.
        assert!(non_increasing(&[(0.05, 30.0), (0.06, 100.0), (0.01, 400.0)], 2.0));
        assert!(!non_increasing(&[(0.05, 30.0), (0.09, 100.0)], 2.0));
    }

    #[test]
    fn rel_err_floor() {
        assert_eq!(rel_err(3.0, 0.0), 3.0);
        assert_eq!(rel_err(90.0, 100.0), 0.1);
    }
}

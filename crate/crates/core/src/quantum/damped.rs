//! Eigenfrequencies of the damped wave equation `∂²v + 2a ∂v − Δv = 0`.
//!
//! Stationary solutions `e^{iτt} u` satisfy `(−Δ + 2iaτ − τ²) u = 0`. Per
//! Fourier mode this is the quadratic eigenproblem
//!
//! ```text
//! Q(τ) w = (τ² − 2iτA − L) w = 0,
//! ```
//!
//! with `L` the symmetrized mode matrix of `−Δ` (h = 1) and `A = diag a(s_i)`.
//! Two routes are provided. The structured one follows each undamped branch
//! `τ ≈ √λ_k` by Newton's method on `det Q` in inverse-iteration form, which
//! stays `O(n)` per step. The companion route linearizes to
//!
//! ```text
//! τ [w; τw] = [[0, I], [L, 2iA]] [w; τw]
//! ```
//!
//! and solves it densely; it is `O(n³)` and meant for cross-checks.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eigen::{
    complex_symmetric_ql, hessenberg_qr, solve_tridiagonal, sort_by_re, DenseMatrix, EigensolveConfig,
};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profile::{Observable, SurfaceProfile};
use crate::quantum::{laplacian_mode, MIN_GRID};
use crate::weylvol::{admissible_set, weyl_prediction, AdmissibleConfig, CountResult, WeylPrediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampedRoute {
    Structured,
    Companion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampedConfig {
    pub grid_n: usize,
    pub route: DampedRoute,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub m_buffer: i64,
    pub eigen: EigensolveConfig,
}

impl Default for DampedConfig {
    fn default() -> Self {
        Self {
            grid_n: 1024,
            route: DampedRoute::Structured,
            newton_tol: 1e-14,
            max_newton: 50,
            m_buffer: 4,
            eigen: EigensolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedMode {
    pub m: i64,
    /// Branch index among the mode's undamped eigenvalues; negative for the
    /// mirrored branch `−τ̄`.
    pub index: i64,
    pub tau: C64,
}

struct ModeData {
    d: Vec<f64>,
    e: Vec<f64>,
    a: Vec<f64>,
}

fn mode_data(profile: &SurfaceProfile, damping: &Observable, m: i64, n: usize) -> Result<ModeData> {
    if damping.depends_on_theta() {
        return Err(Error::NonSeparableObservable);
    }
    if n < MIN_GRID {
        return Err(Error::InvalidInput(format!("grid n = {n} below {MIN_GRID}")));
    }
    let (d, e, _) = laplacian_mode(profile, 1.0, m, n);
    let ds = profile.length / n as f64;
    let a: Vec<f64> = (0..n).map(|i| damping.eval((i as f64 + 0.5) * ds, 0.0)).collect();
    if a.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput("damping must be non-negative".into()));
    }
    Ok(ModeData { d, e, a })
}

/// Unit eigenvector of the real tridiagonal `(d, e)` for eigenvalue `lam`.
fn eigenvector(md: &ModeData, lam: f64) -> Vec<C64> {
    let n = md.d.len();
    let diag: Vec<C64> = md.d.iter().map(|&x| C64::new(x - lam, 0.0)).collect();
    let off: Vec<C64> = md.e.iter().map(|&x| C64::new(x, 0.0)).collect();
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 0.3 * (0.61 * i as f64).sin(), 0.0)).collect();
    for _ in 0..3 {
        v = solve_tridiagonal(&off, &diag, &off, &v);
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= nrm;
        }
    }
    v
}

/// Newton iteration on the branch starting at `tau0` with start vector `v`.
fn newton_branch(md: &ModeData, mut tau: C64, mut v: Vec<C64>, cfg: &DampedConfig) -> Result<C64> {
    let i = C64::new(0.0, 1.0);
    let off: Vec<C64> = md.e.iter().map(|&x| C64::new(-x, 0.0)).collect();
    let mut last = f64::INFINITY;
    for _ in 0..cfg.max_newton {
        let diag: Vec<C64> = md
            .d
            .iter()
            .zip(&md.a)
            .map(|(&d, &a)| tau * tau - i * tau * (2.0 * a) - d)
            .collect();
        let rhs: Vec<C64> = v
            .iter()
            .zip(&md.a)
            .map(|(&x, &a)| (tau * 2.0 - i * (2.0 * a)) * x)
            .collect();
        let u = solve_tridiagonal(&off, &diag, &off, &rhs);
        let vu: C64 = v.iter().zip(&u).map(|(x, y)| x.conj() * y).sum();
        if vu.norm() == 0.0 || !vu.re.is_finite() || !vu.im.is_finite() {
            // Exactly singular: tau is already an eigenvalue.
            return Ok(tau);
        }
        let step = -vu.inv();
        tau += step;
        let nrm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v = u.into_iter().map(|z| z / nrm).collect();
        let scale = tau.norm().max(1.0);
        let size = step.norm();
        // Quadratic convergence ends in roundoff noise; stop once steps stop shrinking.
        if size <= cfg.newton_tol * scale || (size <= 1e-9 * scale && size >= 0.5 * last) {
            return Ok(tau);
        }
        last = size;
    }
    Err(Error::ConvergenceFailure(format!(
        "damped-wave Newton iteration did not settle near τ = {tau}"
    )))
}

fn structured_mode(md: &ModeData, window: (f64, f64), cfg: &DampedConfig) -> Result<Vec<(i64, C64)>> {
    let a_max = md.a.iter().copied().fold(0.0, f64::max);
    let margin = 1.0 + 2.0 * a_max;
    let d: Vec<C64> = md.d.iter().map(|&x| C64::new(x, 0.0)).collect();
    let e: Vec<C64> = md.e.iter().map(|&x| C64::new(x, 0.0)).collect();
    let mut lams: Vec<f64> = complex_symmetric_ql(&d, &e, &cfg.eigen)?.iter().map(|z| z.re).collect();
    lams.sort_by(f64::total_cmp);
    let r_lo = (window.0.abs().min(window.1.abs()) - margin).max(0.0);
    let r_hi = window.0.abs().max(window.1.abs()) + margin;
    let mut out = Vec::new();
    for (k, &lam) in lams.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let r = lam.sqrt();
        if r < r_lo || r > r_hi {
            continue;
        }
        let v = eigenvector(md, lam);
        let avg: f64 = v.iter().zip(&md.a).map(|(x, a)| x.norm_sqr() * a).sum();
        let tau0 = C64::new((lam - avg * avg).max(0.0).sqrt(), avg);
        let tau = newton_branch(md, tau0, v, cfg)?;
        out.push((k as i64, tau));
    }
    // Distinct branches must not merge.
    let mut sorted: Vec<C64> = out.iter().map(|x| x.1).collect();
    sort_by_re(&mut sorted);
    for w in sorted.windows(2) {
        if (w[1] - w[0]).norm() <= 1e-8 * w[1].norm().max(1.0) {
            return Err(Error::ConvergenceFailure(format!(
                "two damped branches converged to the same eigenfrequency {}",
                w[0]
            )));
        }
    }
    Ok(out)
}

fn companion_mode(md: &ModeData, cfg: &DampedConfig) -> Result<Vec<(i64, C64)>> {
    let n = md.d.len();
    let mut c = DenseMatrix::zeros(2 * n);
    for k in 0..n {
        *c.at_mut(k, n + k) = C64::new(1.0, 0.0);
        *c.at_mut(n + k, k) = C64::new(md.d[k], 0.0);
        if k + 1 < n {
            *c.at_mut(n + k, k + 1) = C64::new(md.e[k], 0.0);
            *c.at_mut(n + k + 1, k) = C64::new(md.e[k], 0.0);
        }
        *c.at_mut(n + k, n + k) = C64::new(0.0, 2.0 * md.a[k]);
    }
    let mut z = hessenberg_qr(c, &cfg.eigen)?;
    sort_by_re(&mut z);
    Ok(z.into_iter().enumerate().map(|(k, t)| (k as i64, t)).collect())
}

/// Eigenfrequencies of mode `m` with `Re τ` in `window`.
pub fn damped_wave_modes(
    profile: &SurfaceProfile,
    damping: &Observable,
    m: i64,
    window: (f64, f64),
    cfg: &DampedConfig,
) -> Result<Vec<DampedMode>> {
    let md = mode_data(profile, damping, m, cfg.grid_n)?;
    let raw = match cfg.route {
        DampedRoute::Structured => {
            // Branches with Re τ > 0 and their mirror images −τ̄.
            let pos = structured_mode(&md, window, cfg)?;
            let mut all = pos.clone();
            all.extend(pos.iter().map(|&(k, t)| (-k - 1, -t.conj())));
            all
        }
        DampedRoute::Companion => companion_mode(&md, cfg)?,
    };
    let mut out: Vec<DampedMode> = raw
        .into_iter()
        .filter(|(_, t)| t.re >= window.0 && t.re <= window.1)
        .map(|(index, tau)| DampedMode { m, index, tau })
        .collect();
    out.sort_by(|a, b| a.tau.re.total_cmp(&b.tau.re).then(a.tau.im.total_cmp(&b.tau.im)));
    Ok(out)
}

/// Eigenfrequencies over all modes `|m| ≤ ⌈max|Re τ| f_max⌉ + buffer`,
/// sorted by `(m, Re τ)`. Modes `m` and `−m` coincide and are solved once.
pub fn damped_wave_spectrum(
    profile: &SurfaceProfile,
    damping: &Observable,
    window: (f64, f64),
    cfg: &DampedConfig,
    exec: Execution,
) -> Result<Vec<DampedMode>> {
    let r = window.0.abs().max(window.1.abs());
    let m_cap = (r * profile.f_max).ceil() as i64 + cfg.m_buffer;
    let ms: Vec<i64> = (0..=m_cap).collect();
    let per = par::try_map(exec, &ms, |&m| damped_wave_modes(profile, damping, m, window, cfg))?;
    let mut out = Vec::new();
    for modes in per {
        for md in &modes {
            out.push(*md);
            if md.m != 0 {
                out.push(DampedMode { m: -md.m, ..*md });
            }
        }
    }
    out.sort_by(|a, b| a.m.cmp(&b.m).then(a.tau.re.total_cmp(&b.tau.re)).then(a.tau.im.total_cmp(&b.tau.im)));
    Ok(out)
}

/// Eigenfrequencies in the open box `(e2, e4) + i(f3, f1)`.
pub fn count_eigenfrequencies(modes: &[DampedMode], e2: f64, e4: f64, f3: f64, f1: f64) -> CountResult {
    CountResult::tally(modes.iter().map(|m| (m.tau.re, m.tau.im)), e2, e4, f3, f1)
}

/// `(2π)^{-2}` times the volume of `{E2² ≤ |ξ|² ≤ E4², ⟨a⟩ ∈ [F3, F1]}`:
/// the band volume at `h = 1` with energies `E2²`, `E4²`, since flow
/// averages are homogeneous of degree zero in `ξ`.
pub fn damped_prediction(
    profile: &SurfaceProfile,
    damping: &Observable,
    box_: (f64, f64, f64, f64),
    adm: &AdmissibleConfig,
    exec: Execution,
) -> Result<WeylPrediction> {
    let (e2, e4, f3, f1) = box_;
    let set = admissible_set(profile, damping, f3, f1, adm, exec)?;
    weyl_prediction(profile, set, e2 * e2, e4 * e4, 1.0, adm.qinf.quad_tol)
}

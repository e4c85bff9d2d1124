//! Spectrum of `P_ε = −h²Δ + iεq(s)` on a surface of revolution.
//!
//! On the Fourier mode `e^{imθ}` the operator is the Sturm–Liouville problem
//!
//! ```text
//! −h² (1/f)(f v')' + h² m²/f² v + iε q v
//! ```
//!
//! discretized on the cell-centred grid `s_i = (i + ½) ds` in divergence
//! form. The fluxes through `s = 0` and `s = L` vanish with `f`, so no
//! boundary condition is imposed at the poles. Scaling by `√(f_i ds)` makes
//! the matrix complex symmetric.

pub mod damped;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::classical::torus_average;
use crate::eigen::{check_residuals, complex_symmetric_ql, sort_by_re, EigensolveConfig};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profile::{Meridian, Observable, SurfaceProfile};
use crate::weylvol::{BandSpec, CountResult};

pub use damped::{
    count_eigenfrequencies, damped_prediction, damped_wave_modes, damped_wave_spectrum, DampedConfig, DampedMode,
    DampedRoute,
};

pub const MIN_GRID: usize = 128;

/// Symmetrized tridiagonal matrix of one Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub m: i64,
    pub n: usize,
    pub ds: f64,
    pub diag: Vec<C64>,
    pub offdiag: Vec<C64>,
    /// Cell areas `f_i ds`.
    pub weight: Vec<f64>,
}

/// Real part of the mode operator (the `−h²Δ` piece) as plain arrays:
/// diagonal, off-diagonal, and cell-centre profile values.
pub(crate) fn laplacian_mode(profile: &SurfaceProfile, h: f64, m: i64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let l = profile.length;
    let ds = l / n as f64;
    let fc: Vec<f64> = (0..n).map(|i| profile.f((i as f64 + 0.5) * ds)).collect();
    // f at the n+1 cell faces; the end faces are the poles.
    let ff: Vec<f64> = (0..=n)
        .map(|i| if i == 0 || i == n { 0.0 } else { profile.f(i as f64 * ds) })
        .collect();
    let h2 = h * h;
    let m2 = (m as f64) * (m as f64);
    let inv_ds2 = 1.0 / (ds * ds);
    let diag: Vec<f64> = (0..n)
        .map(|i| h2 * (ff[i] + ff[i + 1]) * inv_ds2 / fc[i] + h2 * m2 / (fc[i] * fc[i]))
        .collect();
    let off: Vec<f64> = (0..n - 1)
        .map(|i| -h2 * ff[i + 1] * inv_ds2 / (fc[i] * fc[i + 1]).sqrt())
        .collect();
    (diag, off, fc)
}

pub fn discretize_mode(
    profile: &SurfaceProfile,
    obs: &Observable,
    h: f64,
    eps: f64,
    m: i64,
    n: usize,
) -> Result<ModeOperator> {
    if obs.depends_on_theta() {
        return Err(Error::NonSeparableObservable);
    }
    if n < MIN_GRID {
        return Err(Error::InvalidInput(format!("grid n = {n} below {MIN_GRID}")));
    }
    if !(h > 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("h = {h}, eps = {eps}")));
    }
    let ds = profile.length / n as f64;
    let (d, e, fc) = laplacian_mode(profile, h, m, n);
    let diag = d
        .iter()
        .enumerate()
        .map(|(i, &x)| C64::new(x, eps * obs.eval((i as f64 + 0.5) * ds, 0.0)))
        .collect();
    Ok(ModeOperator {
        m,
        n,
        ds,
        diag,
        offdiag: e.iter().map(|&x| C64::new(x, 0.0)).collect(),
        weight: fc.iter().map(|f| f * ds).collect(),
    })
}

/// All `n` eigenvalues, sorted by real part, with the largest sampled
/// backward error.
pub fn eigenvalues_mode(op: &ModeOperator, cfg: &EigensolveConfig) -> Result<(Vec<C64>, f64)> {
    let mut z = complex_symmetric_ql(&op.diag, &op.offdiag, cfg)?;
    sort_by_re(&mut z);
    let worst = check_residuals(&op.diag, &op.offdiag, &z, cfg)?;
    Ok((z, worst))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub m: i64,
    /// Position within the sorted eigenvalues of mode `m`.
    pub index: usize,
    pub z: C64,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub h: f64,
    pub eps: f64,
    pub window: (f64, f64),
    pub entries: Vec<SpectrumEntry>,
    pub modes: usize,
    pub skipped_modes: usize,
    pub max_backward_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub grid_n: usize,
    /// Extra modes beyond `√E_hi f_max / h`.
    pub m_buffer: i64,
    /// Eigenvalues with real part within `guard · h` of the window are kept.
    pub guard: f64,
    pub eigen: EigensolveConfig,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            grid_n: 2048,
            m_buffer: 4,
            guard: 4.0,
            eigen: EigensolveConfig::default(),
        }
    }
}

/// Eigenvalues over all modes `|m| ≤ M` with real part near `window`.
///
/// The mode operator depends on `m²` only, so each `|m|` is solved once and
/// its eigenvalues are listed for both signs.
pub fn assemble_spectrum(
    profile: &SurfaceProfile,
    obs: &Observable,
    h: f64,
    eps: f64,
    window: (f64, f64),
    cfg: &SpectrumConfig,
    exec: Execution,
) -> Result<Spectrum> {
    let (e_lo, e_hi) = window;
    if !(e_lo < e_hi) || !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidInput(format!("spectral window [{e_lo}, {e_hi}] at h = {h}")));
    }
    if e_hi + cfg.guard * h <= 0.0 {
        // -h²Δ is non-negative: nothing to solve.
        return Ok(Spectrum {
            h,
            eps,
            window,
            entries: Vec::new(),
            modes: 0,
            skipped_modes: 0,
            max_backward_error: 0.0,
        });
    }
    let m_cap = (e_hi.max(0.0).sqrt() * profile.f_max / h).ceil() as i64 + cfg.m_buffer;
    let n = cfg.grid_n;
    let lo = e_lo - cfg.guard * h;
    let hi = e_hi + cfg.guard * h;

    // Skip modes whose centrifugal term alone exceeds 1e8 E_hi everywhere.
    let fmax2 = profile.f_max * profile.f_max;
    let ms: Vec<i64> = (0..=m_cap)
        .filter(|&m| h * h * (m * m) as f64 / fmax2 <= 1e8 * hi)
        .collect();
    let skipped = (m_cap + 1) as usize - ms.len();

    type ModeSolve = (i64, Vec<(usize, C64)>, f64);
    let solved = par::try_map(exec, &ms, |&m| -> Result<ModeSolve> {
        let op = discretize_mode(profile, obs, h, eps, m, n)?;
        let (z, err) = eigenvalues_mode(&op, &cfg.eigen)?;
        let kept = z.into_iter().enumerate().filter(|(_, z)| z.re >= lo && z.re <= hi).collect();
        Ok((m, kept, err))
    })?;

    let mut entries = Vec::new();
    let mut worst: f64 = 0.0;
    for (m, kept, err) in &solved {
        worst = worst.max(*err);
        for sign in if *m == 0 { vec![1] } else { vec![-1, 1] } {
            for &(index, z) in kept {
                entries.push(SpectrumEntry {
                    m: sign * m,
                    index,
                    z,
                    grid_n: n,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.m.cmp(&b.m).then(a.z.re.total_cmp(&b.z.re)).then(a.index.cmp(&b.index)));
    Ok(Spectrum {
        h,
        eps,
        window,
        entries,
        modes: (2 * ms.len()).saturating_sub(usize::from(ms.first() == Some(&0))),
        skipped_modes: 2 * skipped,
        max_backward_error: worst,
    })
}

/// Eigenvalues in `(E2, E4) + iε(F3, F1)`.
pub fn count_in_rectangle(spectrum: &Spectrum, band: &BandSpec) -> CountResult {
    let eps = band.eps;
    CountResult::tally(
        spectrum.entries.iter().map(|e| (e.z.re, e.z.im / eps)),
        band.e2,
        band.e4,
        band.f3,
        band.f1,
    )
}

/// Eigenvalues with real part in `(e1, e2)`, any imaginary part.
pub fn count_in_strip(spectrum: &Spectrum, e1: f64, e2: f64) -> CountResult {
    CountResult::tally(
        spectrum.entries.iter().map(|e| (e.z.re, 0.0)),
        e1,
        e2,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImagCorrespondence {
    pub samples: usize,
    pub median: f64,
    pub p90: f64,
}

/// Residuals `|Im z/ε − ⟨q⟩(Λ_a)|` with `a = hm/√Re z`, over eigenvalues in
/// the window with `|a| ≤ a_frac · f_max`.
pub fn imag_correspondence(
    spectrum: &Spectrum,
    profile: &SurfaceProfile,
    obs: &Observable,
    a_frac: f64,
    quad_tol: f64,
    exec: Execution,
) -> Result<ImagCorrespondence> {
    if !(spectrum.eps > 0.0) {
        return Err(Error::InvalidInput("imaginary-part correspondence needs eps > 0".into()));
    }
    let (w0, w1) = spectrum.window;
    let picks: Vec<(f64, f64)> = spectrum
        .entries
        .iter()
        .filter(|e| e.z.re > w0 && e.z.re < w1)
        .map(|e| (spectrum.h * e.m as f64 / e.z.re.sqrt(), e.z.im / spectrum.eps))
        .filter(|(a, _)| a.abs() <= a_frac * profile.f_max)
        .collect();
    let mut res = par::try_map(exec, &picks, |&(a, y)| {
        torus_average(profile, obs, a, quad_tol).map(|q| (y - q).abs())
    })?;
    res.sort_by(f64::total_cmp);
    let pick = |f: f64| {
        if res.is_empty() {
            f64::NAN
        } else {
            res[((res.len() - 1) as f64 * f).round() as usize]
        }
    };
    Ok(ImagCorrespondence {
        samples: res.len(),
        median: pick(0.5),
        p90: pick(0.9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_exact(h: f64, e_max: f64, m: i64) -> Vec<f64> {
        (m.unsigned_abs()..)
            .map(|l| h * h * (l * (l + 1)) as f64)
            .take_while(|&e| e <= e_max)
            .collect()
    }

    #[test]
    fn sphere_mode_matches_spherical_harmonics() {
        let p = SurfaceProfile::sphere();
        let h = 0.1;
        for m in [0, 1, 5] {
            let op = discretize_mode(&p, &Observable::Cos2s, h, 0.0, m, 1024).unwrap();
            let (z, err) = eigenvalues_mode(&op, &EigensolveConfig::default()).unwrap();
            assert!(err < 1e-12);
            let exact = sphere_exact(h, 1.5, m);
            for (k, e) in exact.iter().enumerate() {
                let tol = 1e-3 * e + 1e-10;
                assert!((z[k].re - e).abs() <= tol, "m={m} k={k}: {} vs {e}", z[k].re);
                assert_eq!(z[k].im, 0.0);
            }
        }
    }

    #[test]
    fn second_order_convergence() {
        let p = SurfaceProfile::sphere();
        let h = 0.1;
        let m = 3;
        let err = |n: usize| {
            let op = discretize_mode(&p, &Observable::Cos2s, h, 0.0, m, n).unwrap();
            let (z, _) = eigenvalues_mode(&op, &EigensolveConfig::default()).unwrap();
            let l = 7.0;
            (z[4].re - h * h * l * (l + 1.0)).abs()
        };
        let ratio = err(256) / err(512);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn theta_dependent_observable_is_rejected() {
        let obs = Observable::ThetaCoupled {
            eta: 0.1,
            base: Box::new(Observable::Cos2s),
            coupling: Box::new(Observable::CosS),
        };
        let r = discretize_mode(&SurfaceProfile::sphere(), &obs, 0.1, 0.1, 0, 256);
        assert!(matches!(r, Err(Error::NonSeparableObservable)));
    }

    #[test]
    fn perturbation_moves_eigenvalues_into_the_band() {
        let p = SurfaceProfile::sphere();
        let h = 0.05;
        let eps = 0.01;
        let s = assemble_spectrum(
            &p,
            &Observable::Cos2s,
            h,
            eps,
            (0.5, 0.8),
            &SpectrumConfig {
                grid_n: 512,
                ..SpectrumConfig::default()
            },
            Execution::Parallel,
        )
        .unwrap();
        assert!(!s.entries.is_empty());
        for e in &s.entries {
            let y = e.z.im / eps;
            assert!(y > -0.02 && y < 0.52, "{e:?}");
        }
        // m and −m coincide.
        for e in s.entries.iter().filter(|e| e.m > 0) {
            let twin = s.entries.iter().find(|f| f.m == -e.m && f.index == e.index).unwrap();
            assert_eq!(twin.z, e.z);
        }
    }

    #[test]
    fn window_below_spectrum_is_empty() {
        let p = SurfaceProfile::sphere();
        let s = assemble_spectrum(
            &p,
            &Observable::Cos2s,
            0.1,
            0.0,
            (-2.0, -1.0),
            &SpectrumConfig {
                grid_n: 256,
                ..SpectrumConfig::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        assert!(s.entries.is_empty());
        assert_eq!(s.modes, 0);
        let s = assemble_spectrum(
            &p,
            &Observable::Cos2s,
            0.1,
            0.0,
            (-2.0, 1e-30),
            &SpectrumConfig {
                grid_n: 256,
                guard: 0.0,
                ..SpectrumConfig::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        // Only the constant mode sits at (numerically) zero.
        assert!(s.entries.len() <= 1);
    }
}

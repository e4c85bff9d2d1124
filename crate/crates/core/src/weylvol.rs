//! Phase-space volumes, admissible tori, and the Bohr–Sommerfeld lattice.
//!
//! Eigenvalues of `-h²Δ + iεq` in a rectangle `(E2, E4) + iε(F3, F1)` are
//! counted by the Liouville volume of the energy shell restricted to tori
//! whose flow averages of `q` stay inside `[F3, F1]`. In the coordinates
//! `(E, a, angles)` that volume is
//!
//! ```text
//! vol = 2π (E4 − E2) ∫_A J(1, a) da
//! ```
//!
//! since `dσ dθ* = |∂(σ,θ*)/∂(E,a)| dE da = dE da / (2√(1 − a²/f²))` on each
//! of the two `σ` branches, with `θ*` scaled by `√E` cancelling the
//! `1/√E` in `σ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::classical::{
    action_iota, diophantine_class, q_infinity, rotation_number, torus_average, weight_j, DiophantineClass,
    QInfConfig,
};
use crate::error::{Error, Level, Result};
use crate::par::{self, Execution};
use crate::profile::{area, Observable, SurfaceProfile};
use crate::quad::TanhSinh;
use crate::roots::{bisect, golden_min};

/// Points closer than this to a rectangle edge are reported separately.
pub const BOUNDARY_BAND: f64 = 1e-8;

/// Counting rectangle `(E2, E4) + iε(F3, F1)` at a given `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub e2: f64,
    pub e4: f64,
    pub f3: f64,
    pub f1: f64,
    pub eps: f64,
    pub h: f64,
    /// `ε = h^alpha`, when the strength was given that way.
    pub alpha: Option<f64>,
}

impl BandSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("band: {what}")));
        if !(self.e2 < self.e4) {
            return bad(&format!("E2 = {} must be below E4 = {}", self.e2, self.e4));
        }
        if !(self.f3 < self.f1) {
            return bad(&format!("F3 = {} must be below F1 = {}", self.f3, self.f1));
        }
        if !(self.h > 0.0) {
            return bad(&format!("h = {} must be positive", self.h));
        }
        if !(self.eps >= 0.0) {
            return bad(&format!("eps = {} must be non-negative", self.eps));
        }
        Ok(())
    }
}

/// Number of points inside an open rectangle plus those within
/// [`BOUNDARY_BAND`] of its edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResult {
    pub count: usize,
    pub boundary_proximate: usize,
}

impl CountResult {
    /// Count `(x, y)` pairs in `(x0, x1) × (y0, y1)`.
    pub fn tally<I: IntoIterator<Item = (f64, f64)>>(pts: I, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let mut out = CountResult::default();
        for (x, y) in pts {
            if x > x0 && x < x1 && y > y0 && y < y1 {
                out.count += 1;
            }
            let near_x = (x - x0).abs() < BOUNDARY_BAND || (x - x1).abs() < BOUNDARY_BAND;
            let near_y = (y - y0).abs() < BOUNDARY_BAND || (y - y1).abs() < BOUNDARY_BAND;
            let in_x = x > x0 - BOUNDARY_BAND && x < x1 + BOUNDARY_BAND;
            let in_y = y > y0 - BOUNDARY_BAND && y < y1 + BOUNDARY_BAND;
            if (near_x && in_y) || (near_y && in_x) {
                out.boundary_proximate += 1;
            }
        }
        out
    }
}

/// A torus on which the torus average equals one of the levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub level: Level,
    pub value: f64,
    pub a: f64,
    pub derivative: f64,
    pub omega: f64,
    pub dioph: DiophantineClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleSet {
    /// Disjoint closed intervals in `a`, sorted.
    pub intervals: Vec<(f64, f64)>,
    pub crossings: Vec<Crossing>,
    /// Set once the levels were checked against every singular and
    /// closed-orbit leaf on the grid.
    pub containment_checked: bool,
    pub f_max: f64,
}

impl AdmissibleSet {
    pub fn empty(f_max: f64) -> Self {
        Self {
            intervals: Vec::new(),
            crossings: Vec::new(),
            containment_checked: true,
            f_max,
        }
    }

    /// All tori, `[−f_max, f_max]`.
    pub fn full(f_max: f64) -> Self {
        Self {
            intervals: vec![(-f_max, f_max)],
            ..Self::empty(f_max)
        }
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, a: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= a && a <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibleConfig {
    pub grid_n: usize,
    pub transversality_tol: f64,
    /// `|g − F|` below this at a local minimum counts as a tangential touch.
    pub touch_tol: f64,
    /// Distance from a singular value at which a level is said to hit it.
    pub level_tol: f64,
    pub qinf: QInfConfig,
}

impl Default for AdmissibleConfig {
    fn default() -> Self {
        Self {
            grid_n: 401,
            transversality_tol: 1e-3,
            touch_tol: 1e-10,
            level_tol: 1e-9,
            qinf: QInfConfig::default(),
        }
    }
}

/// `g'(a)` by the five-point central difference, shrinking the step near
/// the equator so every stencil point stays on a torus.
fn derivative<G: Fn(f64) -> f64>(g: &G, a: f64, f_max: f64) -> f64 {
    let mut step = 1e-4 * f_max;
    while a.abs() + 2.0 * step >= f_max && step > 1e-12 {
        step *= 0.25;
    }
    (-g(a + 2.0 * step) + 8.0 * g(a + step) - 8.0 * g(a - step) + g(a - 2.0 * step)) / (12.0 * step)
}

/// Tori whose flow averages stay in `[F3, F1]`.
///
/// The torus average `g(a)` is sampled on a uniform grid over
/// `[−f_max, f_max]`; level crossings are located by bisection, tangential
/// touches by golden section at local minima of `|g − F|`. Fails if a
/// crossing is not transversal, or if a level lies in the flow-average
/// interval of a singular or closed-orbit leaf.
pub fn admissible_set(
    profile: &SurfaceProfile,
    obs: &Observable,
    f3: f64,
    f1: f64,
    cfg: &AdmissibleConfig,
    exec: Execution,
) -> Result<AdmissibleSet> {
    if !(f3 < f1) {
        return Err(Error::InvalidInput(format!("F3 = {f3} must be below F1 = {f1}")));
    }
    if cfg.grid_n < 5 {
        return Err(Error::InvalidInput(format!("admissible-set grid of {} points", cfg.grid_n)));
    }
    let fm = profile.f_max;
    let tol = cfg.qinf.quad_tol;
    let n = cfg.grid_n;
    let grid: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                -fm
            } else if k == n - 1 {
                fm
            } else if 2 * k + 1 == n {
                0.0
            } else {
                fm * (-1.0 + 2.0 * k as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let values = par::try_map(exec, &grid, |&a| torus_average(profile, obs, a, tol))?;
    let g = |a: f64| torus_average(profile, obs, a, tol).unwrap_or(f64::NAN);
    let equator_value = values[0];

    let mut crossings = Vec::new();
    for (level, level_value) in [(Level::F3, f3), (Level::F1, f1)] {
        let dist: Vec<f64> = values.iter().map(|v| v - level_value).collect();

        if (equator_value - level_value).abs() <= cfg.level_tol {
            return Err(Error::LevelHitsSingularLeaf {
                level,
                value: level_value,
                leaf: format!("equator (a = ±{fm})"),
            });
        }

        let mut roots: Vec<f64> = Vec::new();
        for k in 1..n - 1 {
            if dist[k] == 0.0 {
                roots.push(grid[k]);
            }
        }
        for k in 0..n - 1 {
            let (d0, d1) = (dist[k], dist[k + 1]);
            if d0 != 0.0 && d1 != 0.0 && d0.signum() != d1.signum() {
                roots.push(bisect(|a| g(a) - level_value, grid[k], grid[k + 1], 1e-14)?);
            }
        }
        // Tangential touches show up as local minima of |g − F| without a
        // sign change.
        for k in 1..n - 1 {
            let (dm, d0, dp) = (dist[k - 1].abs(), dist[k].abs(), dist[k + 1].abs());
            if d0 <= dm && d0 <= dp && dist[k - 1].signum() == dist[k + 1].signum() && d0 != 0.0 {
                let (a_min, v_min) = golden_min(|a| (g(a) - level_value).abs(), grid[k - 1], grid[k + 1], 1e-12);
                if v_min < cfg.touch_tol {
                    roots.push(a_min);
                }
            }
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|x, y| (*x - *y).abs() < 1e-12);

        for a in roots {
            let d = derivative(&g, a, fm);
            if !(d.abs() >= cfg.transversality_tol) {
                return Err(Error::TangentCrossing {
                    level,
                    value: level_value,
                    a,
                    derivative: d,
                });
            }
            let omega = rotation_number(profile, a, tol)?;
            crossings.push(Crossing {
                level,
                value: level_value,
                a,
                derivative: d,
                omega,
                dioph: diophantine_class(omega, cfg.qinf.dioph),
            });
        }
    }

    if obs.depends_on_theta() {
        // Closed-orbit tori carry genuine intervals; neither level may fall
        // inside one.
        let interior: Vec<f64> = grid[1..n - 1].to_vec();
        let qinf = par::try_map(exec, &interior, |&a| q_infinity(profile, obs, a, &cfg.qinf))?;
        for (a, q) in interior.iter().zip(&qinf) {
            if q.width() <= 0.0 {
                continue;
            }
            for (level, v) in [(Level::F3, f3), (Level::F1, f1)] {
                if q.contains(v) {
                    let (p, qq) = q.rational.unwrap_or((0, 1));
                    return Err(Error::LevelHitsSingularLeaf {
                        level,
                        value: v,
                        leaf: format!("closed-orbit torus a = {a:.6}, rotation number {p}/{qq}"),
                    });
                }
            }
        }
    }

    crossings.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut breaks: Vec<f64> = vec![-fm];
    breaks.extend(crossings.iter().map(|c| c.a));
    breaks.push(fm);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let v = g(0.5 * (lo + hi));
        if v >= f3 && v <= f1 {
            match intervals.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => intervals.push((lo, hi)),
            }
        }
    }

    Ok(AdmissibleSet {
        intervals,
        crossings,
        containment_checked: true,
        f_max: fm,
    })
}

/// `J(1, a)` with the equatorial limit near `±f_max`.
fn libration_period(profile: &SurfaceProfile, a: f64, quad_tol: f64) -> Result<f64> {
    let a = if profile.f_max - a.abs() < 1e-9 * profile.f_max {
        profile.f_max.copysign(a)
    } else {
        a
    };
    weight_j(profile, |_| 1.0, a, quad_tol)
}

/// `∫_A J(1, a) da`, split at `a = 0` where `J(1, ·)` is not smooth.
pub fn period_integral(profile: &SurfaceProfile, set: &AdmissibleSet, quad_tol: f64) -> Result<f64> {
    let outer = TanhSinh::new((quad_tol * 100.0).max(1e-12));
    let mut total = 0.0;
    for &(lo, hi) in &set.intervals {
        let pieces: Vec<(f64, f64)> = if lo < 0.0 && hi > 0.0 {
            vec![(lo, 0.0), (0.0, hi)]
        } else {
            vec![(lo, hi)]
        };
        for (x0, x1) in pieces {
            let r = outer.integrate(|a| libration_period(profile, a, quad_tol).unwrap_or(f64::NAN), x0, x1)?;
            total += r.value;
        }
    }
    Ok(total)
}

/// Liouville volume of `{E2 ≤ p ≤ E4, a ∈ A}`.
pub fn band_volume(profile: &SurfaceProfile, set: &AdmissibleSet, e2: f64, e4: f64, quad_tol: f64) -> Result<f64> {
    if !(e2 <= e4) {
        return Err(Error::InvalidInput(format!("energies E2 = {e2} > E4 = {e4}")));
    }
    if set.intervals.is_empty() || e2 == e4 {
        return Ok(0.0);
    }
    Ok(2.0 * PI * (e4 - e2) * period_integral(profile, set, quad_tol)?)
}

/// Band volume for energy-dependent levels `F_j(E)`: the energy range is
/// split into `partitions` pieces and the admissible set recomputed at each
/// midpoint. Torus averages of s-only observables do not depend on `E`, so
/// this is exact up to the resolution of `levels`; θ-dependent observables
/// are not supported.
pub fn band_volume_isoenergetic<L>(
    profile: &SurfaceProfile,
    obs: &Observable,
    levels: L,
    e2: f64,
    e4: f64,
    partitions: usize,
    cfg: &AdmissibleConfig,
    exec: Execution,
) -> Result<f64>
where
    L: Fn(f64) -> (f64, f64),
{
    if obs.depends_on_theta() {
        return Err(Error::Unsupported(
            "energy-dependent levels with a θ-dependent observable".into(),
        ));
    }
    if partitions == 0 {
        return Err(Error::InvalidInput("at least one energy partition is needed".into()));
    }
    let de = (e4 - e2) / partitions as f64;
    let mut total = 0.0;
    for k in 0..partitions {
        let lo = e2 + k as f64 * de;
        let (f3, f1) = levels(lo + 0.5 * de);
        let set = admissible_set(profile, obs, f3, f1, cfg, exec)?;
        total += band_volume(profile, &set, lo, lo + de, cfg.qinf.quad_tol)?;
    }
    Ok(total)
}

pub fn weyl_count_prediction(volume: f64, h: f64) -> f64 {
    volume / (2.0 * PI * h).powi(2)
}

/// Weyl prediction for the number of eigenvalues with real part in
/// `[e1, e2]`: `π (e2 − e1) Area(M) / (2πh)²`.
pub fn strip_prediction(profile: &SurfaceProfile, e1: f64, e2: f64, h: f64) -> Result<f64> {
    Ok(weyl_count_prediction(strip_volume(profile, e1, e2)?, h))
}

pub fn strip_volume(profile: &SurfaceProfile, e1: f64, e2: f64) -> Result<f64> {
    if e1 == e2 {
        return Ok(0.0);
    }
    Ok(PI * (e2 - e1) * area(profile, 1e-13)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylPrediction {
    pub volume: f64,
    pub n_pred: f64,
    pub strip_volume: f64,
    pub n_strip_pred: f64,
    pub admissible: AdmissibleSet,
}

pub fn weyl_prediction(
    profile: &SurfaceProfile,
    set: AdmissibleSet,
    e2: f64,
    e4: f64,
    h: f64,
    quad_tol: f64,
) -> Result<WeylPrediction> {
    let volume = band_volume(profile, &set, e2, e4, quad_tol)?;
    let strip = strip_volume(profile, e2, e4)?;
    Ok(WeylPrediction {
        volume,
        n_pred: weyl_count_prediction(volume, h),
        strip_volume: strip,
        n_strip_pred: weyl_count_prediction(strip, h),
        admissible: set,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticePoint {
    /// Libration quantum number.
    pub k: u32,
    /// Angular quantum number.
    pub m: i64,
    pub re_z: f64,
    /// `Im z / ε`, the torus average of `q`.
    pub im_z_over_eps: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BSLattice {
    pub h: f64,
    pub eps: f64,
    pub window: (f64, f64),
    pub a_margin: f64,
    /// Maslov indices of the (libration, rotation) cycles.
    pub maslov: (u32, u32),
    pub points: Vec<LatticePoint>,
    /// Points with `|a| > (1 − a_margin) f_max`, left out of `points`.
    pub excluded: usize,
}

/// Quasi-eigenvalues from the quantization conditions
///
/// ```text
/// √E · ι(hm/√E) = h (k + 1/2),    z = E + iε ⟨q⟩(Λ_{hm/√E}).
/// ```
///
/// The left side increases strictly in `E`, so each `(m, k)` has at most one
/// root in the window.
pub fn bohr_sommerfeld_spectrum(
    profile: &SurfaceProfile,
    obs: &Observable,
    h: f64,
    eps: f64,
    window: (f64, f64),
    a_margin: f64,
    quad_tol: f64,
    exec: Execution,
) -> Result<BSLattice> {
    let (e_lo, e_hi) = window;
    if !(e_lo > 0.0 && e_lo < e_hi && h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lattice window [{e_lo}, {e_hi}] at h = {h}"
        )));
    }
    let fm = profile.f_max;
    let m_max = (e_hi.sqrt() * fm / h).floor() as i64;
    let ms: Vec<i64> = (-m_max..=m_max).collect();
    let per_m = par::try_map(exec, &ms, |&m| -> Result<(Vec<LatticePoint>, usize)> {
        let hm = h * m as f64;
        // Below E = (hm/f_max)² the mode has no torus.
        let e_min = (hm / fm).powi(2);
        let lo = e_lo.max(e_min * (1.0 + 1e-15));
        if lo >= e_hi {
            return Ok((Vec::new(), 0));
        }
        let phase = |e: f64| -> f64 {
            let se = e.sqrt();
            let a = (hm / se).clamp(-fm, fm);
            se * action_iota(profile, a, quad_tol).unwrap_or(f64::NAN)
        };
        let p_lo = phase(lo);
        let p_hi = phase(e_hi);
        let k_first = ((p_lo / h - 0.5).ceil()).max(0.0) as u32;
        let k_last = (p_hi / h - 0.5).floor();
        let mut pts = Vec::new();
        let mut excluded = 0;
        if k_last < 0.0 {
            return Ok((pts, 0));
        }
        for k in k_first..=(k_last as u32) {
            let target = h * (k as f64 + 0.5);
            let e = bisect(|e| phase(e) - target, lo, e_hi, 1e-15 * e_hi)?;
            let a = hm / e.sqrt();
            if a.abs() > (1.0 - a_margin) * fm {
                excluded += 1;
                continue;
            }
            let q = if eps == 0.0 {
                0.0
            } else {
                torus_average(profile, obs, a, quad_tol)?
            };
            pts.push(LatticePoint {
                k,
                m,
                re_z: e,
                im_z_over_eps: q,
                a,
            });
        }
        Ok((pts, excluded))
    })?;
    let mut points = Vec::new();
    let mut excluded = 0;
    for (p, x) in per_m {
        points.extend(p);
        excluded += x;
    }
    Ok(BSLattice {
        h,
        eps,
        window,
        a_margin,
        maslov: (2, 0),
        points,
        excluded,
    })
}

/// Lattice points inside the open counting rectangle.
pub fn count_lattice(lattice: &BSLattice, band: &BandSpec) -> CountResult {
    CountResult::tally(
        lattice.points.iter().map(|p| (p.re_z, p.im_z_over_eps)),
        band.e2,
        band.e4,
        band.f3,
        band.f1,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_set(f3: f64, f1: f64) -> Result<AdmissibleSet> {
        admissible_set(
            &SurfaceProfile::sphere(),
            &Observable::Cos2s,
            f3,
            f1,
            &AdmissibleConfig::default(),
            Execution::Sequential,
        )
    }

    #[test]
    fn sphere_benchmark_set() {
        let set = sphere_set(0.2, 0.4).unwrap();
        assert_eq!(set.intervals.len(), 2);
        let (a, b) = set.intervals[1];
        assert!((a - 0.2f64.sqrt()).abs() < 1e-10, "{a}");
        assert!((b - 0.6f64.sqrt()).abs() < 1e-10, "{b}");
        assert!((set.intervals[0].0 + b).abs() < 1e-10);
        assert_eq!(set.crossings.len(), 4);
        for c in &set.crossings {
            // g'(a) = −a
            assert!((c.derivative + c.a).abs() < 1e-8);
        }
    }

    #[test]
    fn tangent_level_is_rejected() {
        let err = sphere_set(0.2, 0.5).unwrap_err();
        assert!(matches!(err, Error::TangentCrossing { level: Level::F1, .. }), "{err:?}");
    }

    #[test]
    fn equatorial_level_is_rejected() {
        let err = sphere_set(0.0, 0.3).unwrap_err();
        assert!(matches!(err, Error::LevelHitsSingularLeaf { level: Level::F3, .. }), "{err:?}");
    }

    #[test]
    fn empty_when_above_range() {
        let set = sphere_set(0.6, 0.7).unwrap();
        assert!(set.intervals.is_empty());
        let p = SurfaceProfile::sphere();
        assert_eq!(band_volume(&p, &set, 0.9, 1.1, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn volumes_on_the_sphere() {
        let p = SurfaceProfile::sphere();
        let full = band_volume(&p, &AdmissibleSet::full(1.0), 0.9, 1.1, 1e-12).unwrap();
        assert!((full - 0.2 * 4.0 * PI * PI).abs() < 1e-9);
        let strip = strip_volume(&p, 0.9, 1.1).unwrap();
        assert!((full - strip).abs() < 1e-8 * strip);
        let set = sphere_set(0.2, 0.4).unwrap();
        let v = band_volume(&p, &set, 0.9, 1.1, 1e-12).unwrap();
        let exact = 2.0 * PI * 0.2 * PI * 2.0 * (0.6f64.sqrt() - 0.2f64.sqrt());
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        assert!((v - 2.5849).abs() < 1e-4);
        assert!((weyl_count_prediction(v, 0.02) - 163.7).abs() < 0.05);
        assert!((strip_prediction(&p, 0.9, 1.1, 0.02).unwrap() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn full_set_volume_is_strip_volume_on_perturbed_sphere() {
        let p = SurfaceProfile::perturbed_sphere(0.15).unwrap();
        let full = band_volume(&p, &AdmissibleSet::full(p.f_max), 1.0, 2.0, 1e-12).unwrap();
        let strip = strip_volume(&p, 1.0, 2.0).unwrap();
        assert!((full - strip).abs() < 1e-8 * strip, "{full} vs {strip}");
    }

    #[test]
    fn energy_additivity_and_monotonicity() {
        let p = SurfaceProfile::perturbed_sphere(0.15).unwrap();
        let obs = Observable::Cos2s;
        let cfg = AdmissibleConfig::default();
        let set = admissible_set(&p, &obs, 0.2, 0.4, &cfg, Execution::Parallel).unwrap();
        let a = band_volume(&p, &set, 0.9, 1.0, 1e-12).unwrap();
        let b = band_volume(&p, &set, 1.0, 1.1, 1e-12).unwrap();
        let c = band_volume(&p, &set, 0.9, 1.1, 1e-12).unwrap();
        assert!((a + b - c).abs() < 1e-12 * c);
        let wider = admissible_set(&p, &obs, 0.15, 0.45, &cfg, Execution::Parallel).unwrap();
        for &(lo, hi) in &set.intervals {
            assert!(wider.contains(lo) && wider.contains(hi));
        }
        assert!(band_volume(&p, &wider, 0.9, 1.1, 1e-12).unwrap() >= c);
    }

    #[test]
    fn isoenergetic_matches_constant_levels() {
        let p = SurfaceProfile::sphere();
        let cfg = AdmissibleConfig {
            grid_n: 101,
            ..AdmissibleConfig::default()
        };
        let v = band_volume_isoenergetic(&p, &Observable::Cos2s, |_| (0.2, 0.4), 0.9, 1.1, 16, &cfg, Execution::Sequential)
            .unwrap();
        let set = sphere_set(0.2, 0.4).unwrap();
        let w = band_volume(&p, &set, 0.9, 1.1, 1e-12).unwrap();
        assert!((v - w).abs() < 1e-9 * w);
    }

    #[test]
    fn sphere_lattice_closed_form() {
        let p = SurfaceProfile::sphere();
        let h = 0.05;
        let lat = bohr_sommerfeld_spectrum(&p, &Observable::Cos2s, h, 0.1, (0.5, 1.5), 0.0, 1e-13, Execution::Sequential)
            .unwrap();
        assert!(!lat.points.is_empty());
        for pt in &lat.points {
            let n = pt.k as f64 + 0.5 + pt.m.unsigned_abs() as f64;
            let e = (h * n).powi(2);
            assert!((pt.re_z - e).abs() < 1e-12, "{pt:?} vs {e}");
            let l = (pt.k as u64 + pt.m.unsigned_abs()) as f64;
            assert!((pt.re_z - h * h * l * (l + 1.0)).abs() <= h * h / 4.0 + 1e-12);
            let want = 0.5 * (1.0 - (h * pt.m as f64).powi(2) / pt.re_z);
            assert!((pt.im_z_over_eps - want).abs() < 1e-10);
        }
        // Count matches Σ(2ℓ+1) over ℓ with (ℓ+1/2)² h² in the window.
        let expected: usize = (0..200u64)
            .filter(|&l| {
                let e = (h * (l as f64 + 0.5)).powi(2);
                (0.5..=1.5).contains(&e)
            })
            .map(|l| 2 * l as usize + 1)
            .sum();
        assert_eq!(lat.points.len() + lat.excluded, expected);
    }

    #[test]
    fn count_result_boundary() {
        let pts = vec![(1.0, 0.3), (0.9 + 1e-10, 0.3), (1.0, 0.4 - 1e-12), (1.0, 0.5)];
        let c = CountResult::tally(pts, 0.9, 1.1, 0.2, 0.4);
        assert_eq!(c.count, 3);
        assert_eq!(c.boundary_proximate, 2);
    }
}

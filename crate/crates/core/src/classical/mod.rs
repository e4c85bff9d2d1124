//! Invariant tori of the geodesic flow on a surface of revolution.
//!
//! At unit energy the Liouville tori are labelled by the normalized angular
//! momentum `a = θ*`, `|a| < f_max`. Each consists of geodesics bouncing
//! between the parallels `f(s_±) = |a|`. Every quantity here is a
//! one-dimensional integral over `[s_-, s_+]` with an inverse square root
//! singularity at both ends:
//!
//! ```text
//! J(ψ, a) = ∫ ψ f / √(f² − a²) ds          (J(1, a) is the libration period)
//! ω(a)    = (a/π) ∫ 1 / (f √(f² − a²)) ds
//! ι(a)    = (1/π) ∫ √(f² − a²) / f ds
//! ```
//!
//! `a = 0` is the meridian torus (integrals over `[0, L]`) and `|a| = f_max`
//! the equator, where everything is replaced by its limit.

pub mod dioph;
pub mod flow;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profile::{Meridian, Observable, SurfaceProfile};
use crate::quad::{gauss_legendre5_nodes, TanhSinh};
use crate::roots::{bisect, golden_min};

pub use dioph::{convergents, diophantine_class, DiophParams, DiophantineClass, DiophantineKind};
pub use flow::{flow_average, flow_integrate, FlowState, Trajectory};

/// Below this distance from `f_max` a torus is treated as the equator.
pub const EQUATOR_SNAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoints {
    pub s_minus: f64,
    pub s_plus: f64,
}

/// Parallels bounding the torus `Λ_a`. For `a = 0` these are the poles.
pub fn turning_points(profile: &SurfaceProfile, a: f64, tol: f64) -> Result<TurningPoints> {
    let aa = a.abs();
    if !aa.is_finite() || profile.f_max - aa < tol {
        return Err(Error::DegenerateTorus {
            a,
            f_max: profile.f_max,
            tol,
        });
    }
    if aa == 0.0 {
        return Ok(TurningPoints {
            s_minus: 0.0,
            s_plus: profile.length,
        });
    }
    // f vanishes at the poles; pin that so tiny |a| still brackets even
    // though sin(π) rounds to 1.2e-16.
    let l = profile.length;
    let g = |s: f64| if s == 0.0 || s == l { -aa } else { profile.f(s) - aa };
    let s_minus = bisect(g, 0.0, profile.s0, 0.0)?;
    let s_plus = bisect(g, profile.s0, profile.length, 0.0)?;
    Ok(TurningPoints { s_minus, s_plus })
}

/// `∫ kern(s, f, √(f² − a²)) ds` over `[s_-, s_+]`.
///
/// Near each end `f² − a²` is formed as `(f − f_e)(f + f_e)` with
/// `f − f_e` from [`Meridian::f_increment`] and `f_e = f(s_e)`, so the
/// integrand keeps full relative accuracy down to the last node. Replacing
/// `|a|` by `f(s_±)` perturbs `a` by one ulp, which only moves the result by
/// `∂_a J · ulp`.
fn torus_quad<K>(profile: &SurfaceProfile, tp: TurningPoints, quad_tol: f64, kern: K) -> Result<f64>
where
    K: Fn(f64, f64, f64) -> f64,
{
    let fl = profile.f(tp.s_minus);
    let fr = profile.f(tp.s_plus);
    let r = TanhSinh::new(quad_tol).integrate_nodes(
        |n| {
            let (inc, fe) = if n.from_left <= n.from_right {
                (profile.f_increment(tp.s_minus, n.from_left), fl)
            } else {
                (profile.f_increment(tp.s_plus, -n.from_right), fr)
            };
            let f = fe + inc;
            let root = (inc * (f + fe)).max(0.0).sqrt();
            if root == 0.0 {
                return 0.0;
            }
            kern(n.x, f, root)
        },
        tp.s_minus,
        tp.s_plus,
    )?;
    Ok(r.value)
}

fn near_equator(profile: &SurfaceProfile, a: f64) -> bool {
    profile.f_max - a.abs() < EQUATOR_SNAP * profile.f_max.max(1.0)
}

/// Limit of `J(1, a)` as `|a| → f_max`: the period of small oscillations
/// about the equator, `π √(f_max / |f''(s0)|)`.
pub fn equator_period(profile: &SurfaceProfile) -> f64 {
    PI * (profile.f_max / profile.equator_curvature()).sqrt()
}

/// `J(ψ, a) = ∫ ψ(s) f / √(f² − a²) ds`. At the equator this is
/// `ψ(s0)` times [`equator_period`].
pub fn weight_j<P>(profile: &SurfaceProfile, psi: P, a: f64, quad_tol: f64) -> Result<f64>
where
    P: Fn(f64) -> f64,
{
    if near_equator(profile, a) {
        return Ok(psi(profile.s0) * equator_period(profile));
    }
    if a == 0.0 {
        return Ok(TanhSinh::new(quad_tol).integrate(&psi, 0.0, profile.length)?.value);
    }
    let tp = turning_points(profile, a, 0.0)?;
    torus_quad(profile, tp, quad_tol, |s, f, root| psi(s) * f / root)
}

/// Rotation number, odd in `a`. Zero on the meridian torus; at the equator
/// it is the limit `1 / √(f_max |f''(s0)|)`, with the sign of `a`.
pub fn rotation_number(profile: &SurfaceProfile, a: f64, quad_tol: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    if near_equator(profile, a) {
        return Ok(a.signum() / (profile.f_max * profile.equator_curvature()).sqrt());
    }
    let aa = a.abs();
    let tp = turning_points(profile, aa, 0.0)?;
    let v = torus_quad(profile, tp, quad_tol, |_, f, root| 1.0 / (f * root))?;
    Ok(a.signum() * aa * v / PI)
}

/// Libration action `ι(a)`, even in `a`, with `ι(0) = L/π` and `ι → 0` at
/// the equator.
pub fn action_iota(profile: &SurfaceProfile, a: f64, quad_tol: f64) -> Result<f64> {
    let aa = a.abs();
    if aa > profile.f_max {
        return Err(Error::DegenerateTorus {
            a,
            f_max: profile.f_max,
            tol: 0.0,
        });
    }
    if a == 0.0 {
        return Ok(profile.length / PI);
    }
    let delta = profile.f_max - aa;
    if delta < 1e-9 * profile.f_max {
        // ι = δ / √(κ f_max) + O(δ²) for δ = f_max − |a|.
        return Ok(delta / (profile.equator_curvature() * profile.f_max).sqrt());
    }
    let tp = turning_points(profile, aa, 0.0)?;
    Ok(torus_quad(profile, tp, quad_tol, |_, f, root| root / f)? / PI)
}

/// Torus average `⟨q⟩(Λ_a) = J(q̄, a) / J(1, a)` with `q̄` the θ-mean of
/// `q`. On the meridian torus it is the arclength mean of `q̄`, at the
/// equator `q̄(s0)`.
pub fn torus_average(profile: &SurfaceProfile, obs: &Observable, a: f64, quad_tol: f64) -> Result<f64> {
    if near_equator(profile, a) {
        return Ok(obs.theta_mean(profile.s0));
    }
    let num = weight_j(profile, |s| obs.theta_mean(s), a, quad_tol)?;
    let den = weight_j(profile, |_| 1.0, a, quad_tol)?;
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Regular,
    Meridian,
    Equator,
}

/// Accumulation interval of long-time flow averages on one leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QInfinity {
    pub lo: f64,
    pub hi: f64,
    pub leaf: LeafKind,
    /// The equatorial leaf: only its own orbit average is computed.
    pub singular: bool,
    /// Closed-orbit data `(p, q)` when the interval came from a rational torus.
    pub rational: Option<(i64, i64)>,
    /// Rational torus whose orbit height exceeded the cap; the singleton
    /// torus average is returned since the interval shrinks faster than any
    /// power of the height.
    pub height_capped: bool,
}

impl QInfinity {
    fn singleton(v: f64, leaf: LeafKind) -> Self {
        Self {
            lo: v,
            hi: v,
            leaf,
            singular: leaf == LeafKind::Equator,
            rational: None,
            height_capped: false,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QInfConfig {
    pub quad_tol: f64,
    pub ode_tol: f64,
    pub dioph: DiophParams,
    pub theta_grid: usize,
    pub max_theta_grid: usize,
    pub stable_tol: f64,
    pub max_orbit_height: i64,
}

impl Default for QInfConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-12,
            ode_tol: 1e-11,
            dioph: DiophParams::default(),
            theta_grid: 64,
            max_theta_grid: 1024,
            stable_tol: 1e-6,
            max_orbit_height: 32,
        }
    }
}

/// Min and max of a `period`-periodic function sampled on a uniform grid,
/// each polished by golden section within its neighbouring cells. The grid
/// is refined ×4 until both extremes move by less than `cfg.stable_tol`.
fn periodic_extremes<F: Fn(f64) -> f64>(avg: F, period: f64, cfg: &QInfConfig) -> Option<(f64, f64)> {
    let scan = |n: usize| -> (f64, f64) {
        let dx = period / n as f64;
        let vals: Vec<f64> = (0..n).map(|k| avg(k as f64 * dx)).collect();
        let (mut imin, mut imax) = (0, 0);
        for (k, v) in vals.iter().enumerate() {
            if *v < vals[imin] {
                imin = k;
            }
            if *v > vals[imax] {
                imax = k;
            }
        }
        let xmin = imin as f64 * dx;
        let xmax = imax as f64 * dx;
        let lo = golden_min(&avg, xmin - dx, xmin + dx, 1e-10 * period).1.min(vals[imin]);
        let hi = -golden_min(|x| -avg(x), xmax - dx, xmax + dx, 1e-10 * period).1;
        (lo, hi.max(vals[imax]))
    };
    let mut n = cfg.theta_grid.max(4);
    let mut prev = scan(n);
    while n * 4 <= cfg.max_theta_grid {
        n *= 4;
        let cur = scan(n);
        if (cur.0 - prev.0).abs() < cfg.stable_tol && (cur.1 - prev.1).abs() < cfg.stable_tol {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

/// `Q∞(Λ_a)`.
///
/// s-only observables give the singleton torus average on every leaf. For
/// θ-dependent ones the interval is non-trivial only on closed-orbit tori:
/// there every orbit average is computed from one reference orbit rotated
/// by its starting longitude, and the extremes over longitudes are taken.
pub fn q_infinity(profile: &SurfaceProfile, obs: &Observable, a: f64, cfg: &QInfConfig) -> Result<QInfinity> {
    if a.abs() > profile.f_max * (1.0 + EQUATOR_SNAP) {
        return Err(Error::DegenerateTorus {
            a,
            f_max: profile.f_max,
            tol: 0.0,
        });
    }
    if near_equator(profile, a) {
        // The equator traversed at constant speed averages q over θ.
        return Ok(QInfinity::singleton(obs.theta_mean(profile.s0), LeafKind::Equator));
    }
    let leaf = if a == 0.0 { LeafKind::Meridian } else { LeafKind::Regular };
    let avg = torus_average(profile, obs, a, cfg.quad_tol)?;
    if !obs.depends_on_theta() {
        return Ok(QInfinity::singleton(avg, leaf));
    }

    if a == 0.0 {
        // A meridian runs from pole to pole and back down the opposite
        // meridian at unit speed.
        let quad = TanhSinh::new(cfg.quad_tol);
        let l = profile.length;
        let orbit = |t0: f64| {
            quad.integrate(|s| obs.eval(s, t0) + obs.eval(s, t0 + PI), 0.0, l)
                .map(|r| r.value / (2.0 * l))
                .unwrap_or(f64::NAN)
        };
        let (lo, hi) = periodic_extremes(orbit, PI, cfg).ok_or(Error::UndecidedRationality {
            omega: 0.0,
            p: 0,
            q: 1,
        })?;
        return Ok(QInfinity {
            lo,
            hi,
            leaf,
            singular: false,
            rational: Some((0, 1)),
            height_capped: false,
        });
    }

    let omega = rotation_number(profile, a, cfg.quad_tol)?;
    let Some((p, q)) = diophantine_class(omega, cfg.dioph).kind.as_rational() else {
        return Ok(QInfinity::singleton(avg, leaf));
    };
    if q > cfg.max_orbit_height {
        return Ok(QInfinity {
            rational: Some((p, q)),
            height_capped: true,
            ..QInfinity::singleton(avg, leaf)
        });
    }

    let period = q as f64 * weight_j(profile, |_| 1.0, a, cfg.quad_tol)?;
    let start = FlowState::on_torus(profile, a, 0.0)?;
    let traj = flow_integrate(profile, start, period, cfg.ode_tol)?;
    let mut nodes: Vec<(f64, f64, f64)> = Vec::with_capacity(5 * traj.steps_taken());
    for (t0, t1) in traj.step_intervals() {
        let t1 = t1.min(period);
        if t1 <= t0 {
            continue;
        }
        for (t, w) in gauss_legendre5_nodes(t0, t1) {
            let x = traj.state_at(t);
            nodes.push((x.s, x.theta, w / period));
        }
    }
    let orbit = |t0: f64| nodes.iter().map(|&(s, th, w)| w * obs.eval(s, th + t0)).sum::<f64>();
    // Orbits through longitudes differing by 2π/q coincide.
    let (lo, hi) = periodic_extremes(orbit, 2.0 * PI / q as f64, cfg)
        .ok_or(Error::UndecidedRationality { omega, p, q })?;
    Ok(QInfinity {
        lo: lo.min(avg),
        hi: hi.max(avg),
        leaf,
        singular: false,
        rational: Some((p, q)),
        height_capped: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    /// Number of interior grid points `a_k = f_max (−1 + 2(k+1)/(n+1))`.
    pub a_grid: usize,
    pub qinf: QInfConfig,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            a_grid: 33,
            qinf: QInfConfig::default(),
        }
    }
}

/// Symmetric interior grid on `(−f_max, f_max)`; contains `0` for odd `n`.
pub fn a_grid(profile: &SurfaceProfile, n: usize) -> Vec<f64> {
    let step = 2.0 / (n as f64 + 1.0);
    (0..n)
        .map(|k| {
            let x = -1.0 + step * (k as f64 + 1.0);
            // Exact zero at the centre for odd n.
            if 2 * k + 1 == n {
                0.0
            } else {
                profile.f_max * x
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalInvariants {
    pub a: f64,
    pub omega: f64,
    pub iota: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub q_avg: f64,
    pub q_inf: QInfinity,
    pub dioph: DiophantineClass,
}

pub fn classical_invariants(
    profile: &SurfaceProfile,
    obs: &Observable,
    a: f64,
    cfg: &QInfConfig,
) -> Result<ClassicalInvariants> {
    let omega = rotation_number(profile, a, cfg.quad_tol)?;
    Ok(ClassicalInvariants {
        a,
        omega,
        iota: action_iota(profile, a, cfg.quad_tol)?,
        j1: weight_j(profile, |_| 1.0, a, cfg.quad_tol)?,
        q_avg: torus_average(profile, obs, a, cfg.quad_tol)?,
        q_inf: q_infinity(profile, obs, a, cfg)?,
        dioph: diophantine_class(omega, cfg.dioph),
    })
}

/// Invariants on the symmetric `a`-grid, in grid order.
pub fn classical_table(
    profile: &SurfaceProfile,
    obs: &Observable,
    cfg: &ClassicalConfig,
    exec: Execution,
) -> Result<Vec<ClassicalInvariants>> {
    let grid = a_grid(profile, cfg.a_grid);
    par::try_map(exec, &grid, |&a| classical_invariants(profile, obs, a, &cfg.qinf))
}

/// One `classical.csv` record.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalRow {
    pub a: f64,
    pub omega: f64,
    pub iota: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub q_avg: f64,
    pub qinf_lo: f64,
    pub qinf_hi: f64,
    pub dioph_kind: &'static str,
    pub dioph_p: Option<i64>,
    pub dioph_q: Option<i64>,
}

impl From<&ClassicalInvariants> for ClassicalRow {
    fn from(c: &ClassicalInvariants) -> Self {
        let pq = c.dioph.kind.as_rational();
        Self {
            a: c.a,
            omega: c.omega,
            iota: c.iota,
            j1: c.j1,
            q_avg: c.q_avg,
            qinf_lo: c.q_inf.lo,
            qinf_hi: c.q_inf.hi,
            dioph_kind: c.dioph.kind.label(),
            dioph_p: pq.map(|x| x.0),
            dioph_q: pq.map(|x| x.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::area;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_6;

    const TOL: f64 = 1e-13;

    fn perturbed() -> SurfaceProfile {
        SurfaceProfile::perturbed_sphere(0.15).unwrap()
    }

    #[test]
    fn sphere_turning_points() {
        let p = SurfaceProfile::sphere();
        let tp = turning_points(&p, 0.5, 1e-12).unwrap();
        assert!((tp.s_minus - FRAC_PI_6).abs() < 1e-14);
        assert!((tp.s_plus - 5.0 * FRAC_PI_6).abs() < 1e-14);
        assert!(matches!(
            turning_points(&p, 1.0 - 1e-15, 1e-12),
            Err(Error::DegenerateTorus { .. })
        ));
    }

    #[test]
    fn perturbed_turning_points() {
        let p = perturbed();
        let tp = turning_points(&p, 0.5, 1e-12).unwrap();
        assert!((p.f(tp.s_minus) - 0.5).abs() < 1e-12);
        assert!((p.f(tp.s_plus) - 0.5).abs() < 1e-12);
        assert!(tp.s_minus < p.s0 && p.s0 < tp.s_plus);
        for k in 1..100 {
            let s = tp.s_minus + (tp.s_plus - tp.s_minus) * k as f64 / 100.0;
            assert!(p.f(s) > 0.5);
        }
    }

    /// Independent oracle: Gauss–Chebyshev quadrature after `s = s_c + r sin φ`
    /// style substitution is not available in general, so use the substitution
    /// `u = cos s` on the sphere and compare against elementary closed forms.
    #[test]
    fn sphere_closed_forms() {
        let p = SurfaceProfile::sphere();
        for k in 1..33 {
            let a = -1.0 + 2.0 * k as f64 / 33.0;
            let j1 = weight_j(&p, |_| 1.0, a, TOL).unwrap();
            assert!((j1 - PI).abs() < 1e-11, "J1({a}) = {j1}");
            let w = rotation_number(&p, a, TOL).unwrap();
            assert!((w - a.signum()).abs() < 1e-11, "ω({a}) = {w}");
            let i = action_iota(&p, a, TOL).unwrap();
            assert!((i - (1.0 - a.abs())).abs() < 1e-11, "ι({a}) = {i}");
            let q = torus_average(&p, &Observable::Cos2s, a, TOL).unwrap();
            assert!((q - 0.5 * (1.0 - a * a)).abs() < 1e-11);
            let c = weight_j(&p, f64::cos, a, TOL).unwrap();
            assert!(c.abs() < 1e-11);
            let c2 = weight_j(&p, |s| s.cos().powi(2), a, TOL).unwrap();
            assert!((c2 - 0.5 * PI * (1.0 - a * a)).abs() < 1e-11);
        }
        assert_eq!(action_iota(&p, 0.0, TOL).unwrap(), 1.0);
    }

    #[test]
    fn close_to_equator() {
        let p = SurfaceProfile::sphere();
        for a in [1.0 - 1e-6, 1.0 - 1e-10, 1.0 - 1e-12, 1.0] {
            let j1 = weight_j(&p, |_| 1.0, a, TOL).unwrap();
            assert!((j1 - PI).abs() < 1e-9, "J1({a}) = {j1}");
            let i = action_iota(&p, a, TOL).unwrap();
            assert!((i - (1.0 - a)).abs() < 1e-12);
        }
        let q = perturbed();
        let lim = equator_period(&q);
        let near = weight_j(&q, |_| 1.0, q.f_max * (1.0 - 1e-9), TOL).unwrap();
        assert!((near - lim).abs() < 1e-6 * lim);
    }

    #[test]
    fn perturbed_rotation_number_varies() {
        let p = perturbed();
        let w3 = rotation_number(&p, 0.3, TOL).unwrap();
        let w7 = rotation_number(&p, 0.7, TOL).unwrap();
        assert!((w3 - w7).abs() > 1e-3, "{w3} {w7}");
    }

    #[test]
    fn symmetry_in_a() {
        let p = perturbed();
        for a in a_grid(&p, 21) {
            let w = rotation_number(&p, a, TOL).unwrap();
            let wm = rotation_number(&p, -a, TOL).unwrap();
            assert!((w + wm).abs() < 1e-10);
            let i = action_iota(&p, a, TOL).unwrap();
            assert!((i - action_iota(&p, -a, TOL).unwrap()).abs() < 1e-10);
            let q = torus_average(&p, &Observable::Cos2s, a, TOL).unwrap();
            assert!((q - torus_average(&p, &Observable::Cos2s, -a, TOL).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn legendre_identity() {
        for p in [SurfaceProfile::sphere(), perturbed()] {
            for frac in [0.2, 0.5, 0.8] {
                let a = frac * p.f_max;
                let h = 1e-4;
                let io = |x: f64| action_iota(&p, x, 1e-14).unwrap();
                let d = (-io(a + 2.0 * h) + 8.0 * io(a + h) - 8.0 * io(a - h) + io(a - 2.0 * h)) / (12.0 * h);
                let lhs = PI * (io(a) - a * d);
                let j1 = weight_j(&p, |_| 1.0, a, TOL).unwrap();
                assert!((lhs - j1).abs() <= 1e-6, "{:?} a={a}: {lhs} vs {j1}", p.family);
            }
        }
    }

    #[test]
    fn action_foliation_is_complete() {
        for p in [SurfaceProfile::sphere(), perturbed()] {
            let fm = p.f_max;
            // ι is even with a corner at a = 0.
            let int = 2.0
                * TanhSinh::new(1e-12)
                    .integrate(|a| action_iota(&p, a, TOL).unwrap(), 0.0, fm)
                    .unwrap()
                    .value;
            let lhs = 4.0 * PI * PI * int;
            let rhs = PI * area(&p, 1e-13).unwrap();
            assert!((lhs - rhs).abs() <= 1e-6 * rhs, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn meridian_limits() {
        let p = perturbed();
        let j0 = weight_j(&p, |_| 1.0, 0.0, TOL).unwrap();
        assert!((j0 - PI).abs() < 1e-13);
        let j_small = weight_j(&p, |_| 1.0, 1e-7, TOL).unwrap();
        assert!((j_small - j0).abs() < 1e-5);
        let q0 = torus_average(&p, &Observable::Cos2s, 0.0, TOL).unwrap();
        assert!((q0 - 0.5).abs() < 1e-13);
    }

    #[test]
    fn q_infinity_s_only_is_singleton() {
        let p = SurfaceProfile::sphere();
        let cfg = QInfConfig::default();
        let q = q_infinity(&p, &Observable::Cos2s, 0.6, &cfg).unwrap();
        assert!((q.lo - 0.32).abs() < 1e-12 && q.lo == q.hi);
        let e = q_infinity(&p, &Observable::Cos2s, 1.0, &cfg).unwrap();
        assert!(e.singular && e.lo.abs() < 1e-15 && e.width() == 0.0);
        let pp = perturbed();
        for obs in [Observable::Cos2s, Observable::CosS, Observable::Bump { beta: 3.0, s1: 1.2 }] {
            for a in a_grid(&pp, 9) {
                let q = q_infinity(&pp, &obs, a, &cfg).unwrap();
                assert_eq!(q.width(), 0.0);
            }
        }
    }

    fn coupled() -> Observable {
        Observable::ThetaCoupled {
            eta: 0.1,
            base: Box::new(Observable::Cos2s),
            coupling: Box::new(Observable::Bump { beta: 2.0, s1: 1.0 }),
        }
    }

    #[test]
    fn q_infinity_theta_coupled_on_sphere_is_an_interval() {
        let p = SurfaceProfile::sphere();
        let cfg = QInfConfig::default();
        let obs = coupled();
        let q = q_infinity(&p, &obs, 0.5, &cfg).unwrap();
        assert_eq!(q.rational, Some((1, 1)));
        assert!(q.width() > 1e-3, "{q:?}");
        let avg = torus_average(&p, &obs, 0.5, cfg.quad_tol).unwrap();
        assert!((avg - 0.375).abs() < 1e-12);
        assert!(q.contains(avg));
        // Every closed-orbit average lies within the interval.
        for t0 in [0.0, 1.0, 2.5] {
            let st = FlowState::on_torus(&p, 0.5, t0).unwrap();
            let v = flow_average(&p, &obs, st, PI, 1e-11).unwrap();
            assert!(v >= q.lo - 1e-9 && v <= q.hi + 1e-9);
        }
    }

    #[test]
    fn classical_table_is_schedule_independent() {
        let p = perturbed();
        let cfg = ClassicalConfig {
            a_grid: 7,
            ..ClassicalConfig::default()
        };
        let a = classical_table(&p, &Observable::Cos2s, &cfg, Execution::Sequential).unwrap();
        let b = classical_table(&p, &Observable::Cos2s, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[3].a, 0.0);
        assert_eq!(a[3].dioph.kind, DiophantineKind::Rational { p: 0, q: 1 });
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariants_hold_on_random_tori(c in -0.3f64..0.16, frac in -0.97f64..0.97) {
            let p = SurfaceProfile::perturbed_sphere(c).unwrap();
            let a = frac * p.f_max;
            let i = action_iota(&p, a, TOL).unwrap();
            prop_assert!(i > 0.0);
            let cfg = QInfConfig::default();
            let q = q_infinity(&p, &Observable::Cos2s, a, &cfg).unwrap();
            let avg = torus_average(&p, &Observable::Cos2s, a, cfg.quad_tol).unwrap();
            prop_assert!(q.lo <= avg && avg <= q.hi);
            if a != 0.0 {
                let tp = turning_points(&p, a, 1e-12).unwrap();
                prop_assert!((p.f(tp.s_minus) - a.abs()).abs() < 1e-12);
                prop_assert!((p.f(tp.s_plus) - a.abs()).abs() < 1e-12);
            }
        }
    }
}

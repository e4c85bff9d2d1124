//! Surfaces of revolution and the observable catalog.
//!
//! A surface is given by its meridian profile `f(s)`, the distance to the
//! axis as a function of arclength `s ∈ [0, L]`. Only `f` enters the
//! principal symbol `σ² + θ*²/f(s)²` of `-h²Δ`, so the height function `g`
//! is never needed except for plotting.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::TanhSinh;
use crate::roots::bisect;

/// Minimal interface for a meridian profile. The catalog type
/// [`SurfaceProfile`] implements it; validation and area work on any
/// implementor so that malformed profiles can be checked too.
pub trait Meridian: Send + Sync {
    fn length(&self) -> f64;
    fn f(&self, s: f64) -> f64;
    fn f_prime(&self, s: f64) -> f64;
    fn f_double_prime(&self, s: f64) -> f64;

    /// `f(s + ds) - f(s)` without cancellation for tiny `ds`.
    fn f_increment(&self, s: f64, ds: f64) -> f64 {
        self.f(s + ds) - self.f(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `f(s) = sin s` on `[0, π]`: the round unit sphere.
    Sphere,
    /// `f(s) = sin s + c sin³ s` on `[0, π]`.
    PerturbedSphere { c: f64 },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Sphere => "sphere",
            Family::PerturbedSphere { .. } => "perturbed_sphere",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        if let Family::PerturbedSphere { c } = self {
            p.insert("c".to_string(), *c);
        }
        p
    }
}

/// An immutable catalog surface of revolution with its equatorial data.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    pub family: Family,
    pub length: f64,
    /// Location of the unique maximum of `f`.
    pub s0: f64,
    pub f_max: f64,
}

impl SurfaceProfile {
    pub fn sphere() -> Self {
        Self::from_family(Family::Sphere)
    }

    pub fn perturbed_sphere(c: f64) -> Result<Self> {
        let mut p = BTreeMap::new();
        p.insert("c".to_string(), c);
        make_profile("perturbed_sphere", &p)
    }

    fn from_family(family: Family) -> Self {
        let mut p = Self {
            family,
            length: PI,
            s0: 0.5 * PI,
            f_max: 1.0,
        };
        // Both catalog families peak at π/2; locate it numerically anyway so
        // that s0 and f_max are consistent with f to the last bit.
        let s0 = bisect(|s| p.f_prime(s), 0.25 * PI, 0.75 * PI, 0.0).unwrap_or(0.5 * PI);
        p.s0 = s0;
        p.f_max = p.f(s0);
        p
    }

    pub fn tag(&self) -> &'static str {
        self.family.tag()
    }

    /// `g'(s) = sqrt(1 - f'(s)^2)`; plotting only.
    pub fn g_prime(&self, s: f64) -> f64 {
        (1.0 - self.f_prime(s).powi(2)).max(0.0).sqrt()
    }

    /// `|f''(s0)|`, the curvature of the profile at the equator.
    pub fn equator_curvature(&self) -> f64 {
        self.f_double_prime(self.s0).abs()
    }
}

impl Meridian for SurfaceProfile {
    fn length(&self) -> f64 {
        self.length
    }

    fn f(&self, s: f64) -> f64 {
        let x = s.sin();
        match self.family {
            Family::Sphere => x,
            Family::PerturbedSphere { c } => x + c * x * x * x,
        }
    }

    fn f_prime(&self, s: f64) -> f64 {
        let (x, y) = s.sin_cos();
        match self.family {
            Family::Sphere => y,
            Family::PerturbedSphere { c } => y * (1.0 + 3.0 * c * x * x),
        }
    }

    fn f_double_prime(&self, s: f64) -> f64 {
        let (x, y) = s.sin_cos();
        match self.family {
            Family::Sphere => -x,
            Family::PerturbedSphere { c } => -x + 6.0 * c * x * y * y - 3.0 * c * x * x * x,
        }
    }

    fn f_increment(&self, s: f64, ds: f64) -> f64 {
        // sin(s + ds) - sin(s) = 2 cos(s + ds/2) sin(ds/2)
        let dsin = 2.0 * (s + 0.5 * ds).cos() * (0.5 * ds).sin();
        match self.family {
            Family::Sphere => dsin,
            Family::PerturbedSphere { c } => {
                let x = (s + ds).sin();
                let y = s.sin();
                dsin * (1.0 + c * (x * x + x * y + y * y))
            }
        }
    }
}

/// Build a catalog profile from its tag and parameters.
pub fn make_profile(family_tag: &str, params: &BTreeMap<String, f64>) -> Result<SurfaceProfile> {
    let reject_extra = |allowed: &[&str]| -> Result<()> {
        for k in params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "family `{family_tag}` does not take parameter `{k}`"
                )));
            }
        }
        Ok(())
    };
    match family_tag {
        "sphere" => {
            reject_extra(&[])?;
            Ok(SurfaceProfile::from_family(Family::Sphere))
        }
        "perturbed_sphere" => {
            reject_extra(&["c"])?;
            let c = *params.get("c").ok_or_else(|| {
                Error::Config("family `perturbed_sphere` needs parameter `c`".into())
            })?;
            let out = |reason: &str| Error::ParamOutOfRange {
                family: family_tag.into(),
                param: "c".into(),
                value: c,
                reason: reason.into(),
            };
            if !c.is_finite() {
                return Err(out("must be finite"));
            }
            if c <= -1.0 / 3.0 {
                return Err(out("need c > -1/3 so that f''(π/2) = -(1 + 3c) < 0"));
            }
            if c > 1.0 / 6.0 {
                return Err(out("need c <= 1/6 so that |f'| <= 1 near the poles"));
            }
            Ok(SurfaceProfile::from_family(Family::PerturbedSphere { c }))
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub grid_n: usize,
    pub checks: Vec<Check>,
    /// Critical point found by the sign analysis, if exactly one exists.
    pub s0: Option<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Grid and sign-analysis check of the simple-surface invariants.
pub fn validate_profile<M: Meridian + ?Sized>(profile: &M, grid_n: usize) -> Result<ValidationReport> {
    if grid_n < 64 {
        return Err(Error::InvalidInput(format!("grid_n = {grid_n} < 64")));
    }
    let l = profile.length();
    let mut checks = Vec::new();
    if !(l > 0.0 && l.is_finite()) {
        checks.push(Check {
            name: "length",
            passed: false,
            detail: format!("L = {l}"),
        });
        return Ok(ValidationReport {
            grid_n,
            checks,
            s0: None,
        });
    }
    let tol = 1e-12;
    let grid: Vec<f64> = (0..=grid_n).map(|i| l * i as f64 / grid_n as f64).collect();

    let (f0, fl) = (profile.f(0.0), profile.f(l));
    checks.push(Check {
        name: "vanishes_at_poles",
        passed: f0.abs() <= tol && fl.abs() <= tol,
        detail: format!("f(0) = {f0:e}, f(L) = {fl:e}"),
    });

    let min_interior = grid[1..grid_n]
        .iter()
        .map(|&s| profile.f(s))
        .fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "positive_interior",
        passed: min_interior > 0.0,
        detail: format!("min f on interior grid = {min_interior:e}"),
    });

    let (d0, dl) = (profile.f_prime(0.0), profile.f_prime(l));
    checks.push(Check {
        name: "pole_regularity",
        passed: (d0 - 1.0).abs() <= 1e-9 && (dl + 1.0).abs() <= 1e-9,
        detail: format!("f'(0) = {d0}, f'(L) = {dl}"),
    });

    let slopes: Vec<f64> = grid.iter().map(|&s| profile.f_prime(s)).collect();
    let max_slope2 = slopes.iter().map(|d| d * d).fold(0.0, f64::max);
    checks.push(Check {
        name: "arclength_slope",
        passed: max_slope2 <= 1.0 + 1e-12,
        detail: format!("max f'^2 = {max_slope2}"),
    });

    // Sign changes of f' strictly inside (0, L); a zero at a grid node counts
    // once.
    let mut crossings = Vec::new();
    let mut prev_sign = 0.0;
    for (i, &d) in slopes.iter().enumerate().take(grid_n).skip(1) {
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 && prev_sign != 0.0 && sign != prev_sign {
            crossings.push((grid[i - 1], grid[i]));
        }
        if sign != 0.0 {
            prev_sign = sign;
        }
    }
    let mut s0 = None;
    let simple = if crossings.len() == 1 {
        let (lo, hi) = crossings[0];
        let root = bisect(|s| profile.f_prime(s), lo, hi, 0.0)?;
        let curv = profile.f_double_prime(root);
        s0 = Some(root);
        let rising_then_falling = slopes[1] > 0.0 && slopes[grid_n - 1] < 0.0;
        (
            curv < 0.0 && rising_then_falling,
            format!("one critical point s0 = {root}, f''(s0) = {curv}"),
        )
    } else {
        (false, format!("{} sign changes of f'", crossings.len()))
    };
    checks.push(Check {
        name: "single_nondegenerate_maximum",
        passed: simple.0,
        detail: simple.1,
    });

    Ok(ValidationReport { grid_n, checks, s0 })
}

/// Riemannian area `2π ∫_0^L f ds`.
pub fn area<M: Meridian + ?Sized>(profile: &M, quad_tol: f64) -> Result<f64> {
    let l = profile.length();
    if l <= 0.0 {
        return Ok(0.0);
    }
    let r = TanhSinh::new(quad_tol).integrate(|s| profile.f(s), 0.0, l)?;
    Ok(2.0 * PI * r.value)
}

/// Observable `q(s, θ)` from the fixed catalog.
///
/// Serialized with a `kind` tag, e.g. `{ kind = "bump", beta = 4.0, s1 = 1.0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `cos² s`
    #[serde(rename = "cos2s")]
    Cos2s,
    /// `cos s`
    CosS,
    /// `exp(-beta (s - s1)²)`
    Bump { beta: f64, s1: f64 },
    /// `value`
    Constant { value: f64 },
    /// `base(s) + eta * coupling(s) * cos θ`
    ThetaCoupled {
        eta: f64,
        base: Box<Observable>,
        coupling: Box<Observable>,
    },
}

impl Observable {
    pub fn depends_on_theta(&self) -> bool {
        match self {
            Observable::ThetaCoupled { eta, coupling, .. } => {
                *eta != 0.0 && !matches!(**coupling, Observable::Constant { value } if value == 0.0)
            }
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Observable::Cos2s => "cos2s",
            Observable::CosS => "cos_s",
            Observable::Bump { .. } => "bump",
            Observable::Constant { .. } => "constant",
            Observable::ThetaCoupled { .. } => "theta_coupled",
        }
    }

    pub fn eval(&self, s: f64, theta: f64) -> f64 {
        match self {
            Observable::Cos2s => {
                let c = s.cos();
                c * c
            }
            Observable::CosS => s.cos(),
            Observable::Bump { beta, s1 } => (-beta * (s - s1).powi(2)).exp(),
            Observable::Constant { value } => *value,
            Observable::ThetaCoupled {
                eta,
                base,
                coupling,
            } => base.eval(s, theta) + eta * coupling.eval(s, theta) * theta.cos(),
        }
    }

    /// Average over `θ ∈ [0, 2π)`. Exact for the catalog, whose θ-dependence
    /// is a first-degree trigonometric polynomial; computed with a periodic
    /// trapezoid rule so nested observables stay correct.
    pub fn theta_mean(&self, s: f64) -> f64 {
        if !self.depends_on_theta() {
            return self.eval(s, 0.0);
        }
        const N: usize = 32;
        (0..N)
            .map(|k| self.eval(s, 2.0 * PI * k as f64 / N as f64))
            .sum::<f64>()
            / N as f64
    }

    /// Catalog lookup by kind name with numeric parameters. Nested
    /// observables (`theta_coupled`) have to come through serde.
    pub fn from_kind(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("observable `{kind}` needs parameter `{k}`")))
        };
        match kind {
            "cos2s" => Ok(Observable::Cos2s),
            "cos_s" => Ok(Observable::CosS),
            "bump" => Ok(Observable::Bump {
                beta: get("beta")?,
                s1: get("s1")?,
            }),
            "constant" => Ok(Observable::Constant {
                value: get("value")?,
            }),
            "theta_coupled" => Err(Error::Config(
                "theta_coupled needs nested `base` and `coupling` tables".into(),
            )),
            other => Err(Error::UnknownObservable(other.into())),
        }
    }
}

/// Evaluate a catalog observable at `(s, θ)`, checking `s ∈ [0, L]`.
pub fn eval_observable(profile: &SurfaceProfile, obs: &Observable, s: f64, theta: f64) -> Result<f64> {
    if !(0.0..=profile.length).contains(&s) {
        return Err(Error::InvalidInput(format!(
            "s = {s} outside [0, {}]",
            profile.length
        )));
    }
    Ok(obs.eval(s, theta))
}

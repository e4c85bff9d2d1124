//! Scenario files.
//!
//! ```toml
//! [surface]
//! family = "perturbed_sphere"
//! c = 0.15
//!
//! [observable]
//! kind = "cos2s"
//!
//! [band]
//! e2 = 0.9
//! e4 = 1.1
//! f3 = 0.2
//! f1 = 0.4
//! eps = "h^0.5"        # or a plain number
//!
//! [numerics]
//! h_list = [0.08, 0.04, 0.02]
//! grid_n = 2048
//!
//! [output]
//! dir = "out"
//!
//! [damped]             # optional
//! re_lo = 45.0
//! re_hi = 55.0
//! im_lo = 0.2
//! im_hi = 0.4
//! ```
//!
//! Every section except `[surface]`, `[observable]` and `[band]` may be
//! omitted. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::classical::{ClassicalConfig, QInfConfig};
use crate::eigen::EigensolveConfig;
use crate::error::{Error, Result};
use crate::profile::{make_profile, Observable, SurfaceProfile};
use crate::quantum::{DampedConfig, SpectrumConfig};
use crate::weylvol::{AdmissibleConfig, BandSpec};

/// Perturbation strength: a fixed number or a power of `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Fixed(f64),
    Power(f64),
}

impl Strength {
    pub fn at(self, h: f64) -> f64 {
        match self {
            Strength::Fixed(e) => e,
            Strength::Power(p) => h.powf(p),
        }
    }

    pub fn exponent(self) -> Option<f64> {
        match self {
            Strength::Fixed(_) => None,
            Strength::Power(p) => Some(p),
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => s.parse().ok(),
    }
}

impl FromStr for Strength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::Config(format!("cannot read eps = \"{s}\"; expected a number or \"h^p\""));
        if let Some(p) = t.strip_prefix("h^") {
            let p = parse_number(p).ok_or_else(bad)?;
            return if p.is_finite() && p > 0.0 {
                Ok(Strength::Power(p))
            } else {
                Err(Error::Config(format!("eps exponent must be positive, got {p}")))
            };
        }
        let e = parse_number(t).ok_or_else(bad)?;
        if e.is_finite() && e >= 0.0 {
            Ok(Strength::Fixed(e))
        } else {
            Err(Error::Config(format!("eps must be non-negative, got {e}")))
        }
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strength::Fixed(e) => write!(f, "{e:?}"),
            Strength::Power(p) => write!(f, "h^{p:?}"),
        }
    }
}

impl Serialize for Strength {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Strength::Fixed(e) => s.serialize_f64(*e),
            Strength::Power(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Strength {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => format!("{x:?}").parse(),
            Raw::Int(x) => x.to_string().parse(),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSection {
    pub family: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSection {
    pub kind: String,
    /// `theta_coupled` only: kind names of the base and coupling terms.
    /// Numeric parameters are shared by both.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<String>,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl ObservableSection {
    pub fn build(&self) -> Result<Observable> {
        if self.kind != "theta_coupled" {
            if self.base.is_some() || self.coupling.is_some() {
                return Err(Error::Config(format!(
                    "`base` and `coupling` only apply to theta_coupled, not `{}`",
                    self.kind
                )));
            }
            return Observable::from_kind(&self.kind, &self.params);
        }
        let need = |v: &Option<String>, what: &str| {
            v.clone()
                .ok_or_else(|| Error::Config(format!("theta_coupled needs `{what}` (an observable kind)")))
        };
        let eta = *self
            .params
            .get("eta")
            .ok_or_else(|| Error::Config("theta_coupled needs parameter `eta`".into()))?;
        let base = Observable::from_kind(&need(&self.base, "base")?, &self.params)?;
        let coupling = Observable::from_kind(&need(&self.coupling, "coupling")?, &self.params)?;
        Ok(Observable::ThetaCoupled {
            eta,
            base: Box::new(base),
            coupling: Box::new(coupling),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    pub e2: f64,
    pub e4: f64,
    pub f3: f64,
    pub f1: f64,
    pub eps: Strength,
    /// Second strength exponent whose quantum count is reported alongside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_eps_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub h_list: Vec<f64>,
    /// Grid size of the per-mode discretization.
    pub grid_n: usize,
    pub quad_tol: f64,
    pub ode_tol: f64,
    /// Eigensolver backward-error bound, in units of `u · n`.
    pub backward_error_bound: f64,
    pub max_iterations: usize,
    /// Torus grid for `classical.csv`.
    pub a_grid: usize,
    /// Scan grid of the admissible-set search.
    pub admissible_grid: usize,
    pub transversality_tol: f64,
    /// Lattice points with `|a| > (1 − margin) f_max` are excluded.
    pub lattice_margin: f64,
    /// Also count the real-part strip at `ε = 0`.
    pub strip: bool,
    /// Monte Carlo samples for the volume check; 0 skips it.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            h_list: vec![0.08, 0.04, 0.02],
            grid_n: 2048,
            quad_tol: 1e-12,
            ode_tol: 1e-11,
            backward_error_bound: 100.0,
            max_iterations: 60,
            a_grid: 33,
            admissible_grid: 401,
            transversality_tol: 1e-3,
            lattice_margin: 1e-6,
            strip: true,
            mc_samples: 0,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Box `(re_lo, re_hi) + i(im_lo, im_hi)` in the frequency plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampedSection {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
    #[serde(default = "default_damped_grid")]
    pub grid_n: usize,
    /// Damping coefficient; the `[observable]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<ObservableSection>,
}

fn default_damped_grid() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub surface: SurfaceSection,
    pub observable: ObservableSection,
    pub band: BandSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damped: Option<DampedSection>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let n = &self.numerics;
        if n.h_list.is_empty() {
            return bad("numerics.h_list is empty".into());
        }
        if n.h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return bad(format!("numerics.h_list must hold positive values, got {:?}", n.h_list));
        }
        if n.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("numerics.h_list must be strictly decreasing, got {:?}", n.h_list));
        }
        for (name, v) in [
            ("quad_tol", n.quad_tol),
            ("ode_tol", n.ode_tol),
            ("backward_error_bound", n.backward_error_bound),
            ("transversality_tol", n.transversality_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("numerics.{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&n.lattice_margin) {
            return bad(format!("numerics.lattice_margin must lie in [0, 1), got {}", n.lattice_margin));
        }
        if n.admissible_grid < 3 || n.a_grid == 0 || n.max_iterations == 0 {
            return bad("numerics grid sizes and iteration caps must be positive".into());
        }
        if let Some(p) = self.band.alt_eps_exponent {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("band.alt_eps_exponent must be positive, got {p}"));
            }
        }
        let b = &self.band;
        if !(b.e2 < b.e4) || !(b.f3 < b.f1) {
            return bad(format!("band needs e2 < e4 and f3 < f1, got [{}, {}] x [{}, {}]", b.e2, b.e4, b.f3, b.f1));
        }
        if let Some(d) = &self.damped {
            if !(d.re_lo < d.re_hi) || !(d.im_lo < d.im_hi) {
                return bad("damped box needs re_lo < re_hi and im_lo < im_hi".into());
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<SurfaceProfile> {
        make_profile(&self.surface.family, &self.surface.params)
    }

    pub fn observable(&self) -> Result<Observable> {
        self.observable.build()
    }

    pub fn damping(&self) -> Result<Option<Observable>> {
        match &self.damped {
            None => Ok(None),
            Some(d) => match &d.damping {
                Some(o) => o.build().map(Some),
                None => self.observable().map(Some),
            },
        }
    }

    pub fn band_at(&self, h: f64) -> BandSpec {
        BandSpec {
            e2: self.band.e2,
            e4: self.band.e4,
            f3: self.band.f3,
            f1: self.band.f1,
            eps: self.band.eps.at(h),
            h,
            alpha: self.band.eps.exponent(),
        }
    }

    pub fn eigen(&self) -> EigensolveConfig {
        EigensolveConfig {
            backward_error_bound: self.numerics.backward_error_bound,
            max_iterations: self.numerics.max_iterations,
            ..EigensolveConfig::default()
        }
    }

    pub fn qinf(&self) -> QInfConfig {
        QInfConfig {
            quad_tol: self.numerics.quad_tol,
            ode_tol: self.numerics.ode_tol,
            ..QInfConfig::default()
        }
    }

    pub fn classical(&self) -> ClassicalConfig {
        ClassicalConfig {
            a_grid: self.numerics.a_grid,
            qinf: self.qinf(),
        }
    }

    pub fn admissible(&self) -> AdmissibleConfig {
        AdmissibleConfig {
            grid_n: self.numerics.admissible_grid,
            transversality_tol: self.numerics.transversality_tol,
            qinf: self.qinf(),
            ..AdmissibleConfig::default()
        }
    }

    pub fn spectrum(&self) -> SpectrumConfig {
        SpectrumConfig {
            grid_n: self.numerics.grid_n,
            eigen: self.eigen(),
            ..SpectrumConfig::default()
        }
    }

    pub fn damped_solver(&self) -> DampedConfig {
        DampedConfig {
            grid_n: self.damped.as_ref().map_or(1024, |d| d.grid_n),
            eigen: self.eigen(),
            ..DampedConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"
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
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ScenarioConfig::from_toml(SPHERE).unwrap();
        assert_eq!(c.numerics, NumericsSection::default());
        assert_eq!(c.band.eps, Strength::Power(0.5));
        assert!((c.band_at(0.04).eps - 0.2).abs() < 1e-15);
        assert!(c.damped.is_none());
        assert_eq!(c.profile().unwrap().tag(), "sphere");
    }

    #[test]
    fn strength_forms() {
        assert_eq!("h^(2/3)".parse::<Strength>().unwrap(), Strength::Power(2.0 / 3.0));
        assert_eq!("0.1".parse::<Strength>().unwrap(), Strength::Fixed(0.1));
        assert_eq!("h^0.5".parse::<Strength>().unwrap().to_string(), "h^0.5");
        assert!("h^-1".parse::<Strength>().is_err());
        assert!("eps".parse::<Strength>().is_err());
        let c = ScenarioConfig::from_toml(&SPHERE.replace("\"h^0.5\"", "0")).unwrap();
        assert_eq!(c.band.eps, Strength::Fixed(0.0));
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::from_toml(SPHERE).unwrap();
        c.surface = SurfaceSection {
            family: "perturbed_sphere".into(),
            params: [("c".to_string(), 0.15)].into(),
        };
        c.band.alt_eps_exponent = Some(2.0 / 3.0);
        c.damped = Some(DampedSection {
            re_lo: 45.0,
            re_hi: 55.0,
            im_lo: 0.2,
            im_hi: 0.4,
            grid_n: 1024,
            damping: None,
        });
        let text = c.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_files() {
        let unsorted = format!("{SPHERE}\n[numerics]\nh_list = [0.02, 0.04]\n");
        assert!(matches!(ScenarioConfig::from_toml(&unsorted), Err(Error::Config(_))));
        let unknown = format!("{SPHERE}\n[numerics]\ngridn = 10\n");
        assert!(ScenarioConfig::from_toml(&unknown).is_err());
        let negative = format!("{SPHERE}\n[numerics]\nquad_tol = -1.0\n");
        assert!(ScenarioConfig::from_toml(&negative).is_err());
        assert!(ScenarioConfig::from_toml("[surface]\nfamily = \"sphere\"\n").is_err());
    }

    #[test]
    fn theta_coupled_from_flat_keys() {
        let text = SPHERE.replace(
            "kind = \"cos2s\"",
            "kind = \"theta_coupled\"\nbase = \"cos2s\"\ncoupling = \"cos_s\"\neta = 0.2",
        );
        let c = ScenarioConfig::from_toml(&text).unwrap();
        let obs = c.observable().unwrap();
        assert!(obs.depends_on_theta());
        assert!((obs.eval(0.3, 0.0) - (0.3f64.cos().powi(2) + 0.2 * 0.3f64.cos())).abs() < 1e-15);
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        let missing = SPHERE.replace("kind = \"cos2s\"", "kind = \"theta_coupled\"\neta = 0.2");
        assert!(ScenarioConfig::from_toml(&missing).unwrap().observable().is_err());
    }

    #[test]
    fn unknown_family_surfaces_on_use() {
        let c = ScenarioConfig::from_toml(&SPHERE.replace("\"sphere\"", "\"torus\"")).unwrap();
        assert!(matches!(c.profile(), Err(Error::UnknownFamily(_))));
    }
}

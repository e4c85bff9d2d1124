//! Geodesic flow of `p = σ² + θ*²/f(s)²` and finite-time flow averages.
//!
//! Hamilton's equations
//!
//! ```text
//! ds/dt = 2σ,   dσ/dt = 2 θ*² f'(s) / f(s)³,   dθ/dt = 2 θ* / f(s)²,   dθ*/dt = 0
//! ```
//!
//! are integrated with the Dormand–Prince 5(4) pair and its continuous
//! extension. An extra component accumulates `∫ q dt` so time averages come
//! out of the same error-controlled solve. Meridians (`θ* = 0`) pass through
//! the poles, where `(s, θ)` is singular; they are integrated in an unfolded
//! arclength coordinate and folded back on evaluation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::classical::turning_points;
use crate::error::{Error, Result};
use crate::profile::{Meridian, Observable, SurfaceProfile};
use crate::roots::bisect;

const DIM: usize = 5;
type State = [f64; DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub s: f64,
    pub theta: f64,
    pub sigma: f64,
    pub theta_star: f64,
}

impl FlowState {
    /// The symbol `σ² + θ*²/f(s)²`.
    pub fn energy(&self, profile: &SurfaceProfile) -> f64 {
        let f = profile.f(self.s);
        if self.theta_star == 0.0 {
            return self.sigma * self.sigma;
        }
        self.sigma * self.sigma + (self.theta_star / f).powi(2)
    }

    /// Point of the unit-energy torus `Λ_a` at the inner turning parallel,
    /// at longitude `theta0`. For `a = 0` the meridian starts at the pole
    /// `s = 0` heading south.
    pub fn on_torus(profile: &SurfaceProfile, a: f64, theta0: f64) -> Result<Self> {
        if a == 0.0 {
            return Ok(Self {
                s: 0.0,
                theta: theta0,
                sigma: 1.0,
                theta_star: 0.0,
            });
        }
        let tp = turning_points(profile, a, 1e-12)?;
        Ok(Self {
            s: tp.s_minus,
            theta: theta0,
            sigma: 0.0,
            // Rescale so the energy is exactly one at the computed turning point.
            theta_star: a.signum() * profile.f(tp.s_minus),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct DenseStep {
    t0: f64,
    h: f64,
    rcont: [State; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> State {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut y = [0.0; DIM];
        for i in 0..DIM {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

/// A turning event: `σ` changes sign, i.e. the geodesic touches one of the
/// bounding parallels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Turn {
    pub t: f64,
    pub s: f64,
}

/// Dense-output solution of the flow on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep>,
    meridian: bool,
    length: f64,
    pub t_end: f64,
    pub turns: Vec<Turn>,
    pub rejected_steps: usize,
}

impl Trajectory {
    fn raw(&self, t: f64) -> State {
        let t = t.clamp(0.0, self.t_end);
        let idx = self.steps.partition_point(|st| st.t0 <= t).saturating_sub(1);
        self.steps[idx].eval(t)
    }

    pub fn state_at(&self, t: f64) -> FlowState {
        let y = self.raw(t);
        if self.meridian {
            let (s, theta, flip) = fold(y[0], y[1], self.length);
            FlowState {
                s,
                theta,
                sigma: if flip { -y[2] } else { y[2] },
                theta_star: 0.0,
            }
        } else {
            FlowState {
                s: y[0],
                theta: y[1],
                sigma: y[2],
                theta_star: y[3],
            }
        }
    }

    /// `∫_0^t q dt` along the trajectory (zero if no observable was given).
    pub fn integral_at(&self, t: f64) -> f64 {
        self.raw(t)[4]
    }

    pub fn steps_taken(&self) -> usize {
        self.steps.len()
    }

    /// Step boundaries `(t0, t1)` of the accepted steps.
    pub fn step_intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.steps.iter().map(|s| (s.t0, s.t0 + s.h))
    }
}

/// Fold an unfolded meridian coordinate back onto `[0, L]`; crossing a pole
/// continues on the opposite meridian.
fn fold(s_unf: f64, theta: f64, length: f64) -> (f64, f64, bool) {
    let r = s_unf.rem_euclid(2.0 * length);
    if r <= length {
        (r, theta, false)
    } else {
        (2.0 * length - r, theta + PI, true)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub ode_tol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl FlowOptions {
    pub fn new(ode_tol: f64) -> Self {
        Self {
            ode_tol,
            h_min: 1e-12,
            max_steps: 20_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau. The flow is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..DIM {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate the flow from `state0` over `[0, t_end]`.
pub fn flow_integrate(
    profile: &SurfaceProfile,
    state0: FlowState,
    t_end: f64,
    ode_tol: f64,
) -> Result<Trajectory> {
    integrate_with(profile, None, state0, t_end, FlowOptions::new(ode_tol))
}

/// As [`flow_integrate`], also accumulating `∫ q dt` for `obs`.
pub fn integrate_with(
    profile: &SurfaceProfile,
    obs: Option<&Observable>,
    state0: FlowState,
    t_end: f64,
    opts: FlowOptions,
) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("flow time T = {t_end}")));
    }
    let e0 = state0.energy(profile);
    if !(e0 > 0.0 && e0.is_finite()) {
        return Err(Error::InvalidInput(format!("initial energy p = {e0} must be positive")));
    }
    let meridian = state0.theta_star == 0.0;
    if !meridian && !(state0.s > 0.0 && state0.s < profile.length) {
        return Err(Error::InvalidInput(format!(
            "s = {} must lie strictly inside (0, L) off the meridians",
            state0.s
        )));
    }
    let length = profile.length;
    let rhs = |y: &State| -> State {
        if meridian {
            let (s, th, _) = fold(y[0], y[1], length);
            let q = obs.map_or(0.0, |o| o.eval(s, th));
            [2.0 * y[2], 0.0, 0.0, 0.0, q]
        } else {
            let f = profile.f(y[0]);
            let fp = profile.f_prime(y[0]);
            let ts = y[3];
            let inv2 = 1.0 / (f * f);
            let q = obs.map_or(0.0, |o| o.eval(y[0], y[1]));
            [2.0 * y[2], 2.0 * ts * inv2, 2.0 * ts * ts * fp * inv2 / f, 0.0, q]
        }
    };

    let tol = opts.ode_tol;
    let mut y: State = [state0.s, state0.theta, state0.sigma, state0.theta_star, 0.0];
    let mut t = 0.0;
    let mut k1 = rhs(&y);
    let mut h = (0.01 * tol.powf(0.2)).max(1e-6).min(t_end.max(opts.h_min));
    let mut steps = Vec::new();
    let mut turns = Vec::new();
    let mut rejected = 0usize;

    if t_end == 0.0 {
        steps.push(DenseStep {
            t0: 0.0,
            h: 1.0,
            rcont: [y, [0.0; DIM], [0.0; DIM], [0.0; DIM], [0.0; DIM]],
        });
    }

    while t < t_end {
        if steps.len() + rejected > opts.max_steps {
            return Err(Error::StepFailure {
                t,
                reason: "step budget exhausted".into(),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = rhs(&axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(&axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(&axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = rhs(&axpy(
            &y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        ));
        let y_new = axpy(
            &y,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            h,
        );
        let k7 = rhs(&y_new);

        let mut err = 0.0;
        for i in 0..DIM {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol + tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / DIM as f64).sqrt();

        if !err.is_finite() || err > 1.0 {
            rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
            if h < opts.h_min {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("step size {h:e} below floor {:e}", opts.h_min),
                });
            }
            continue;
        }

        let mut rcont = [[0.0; DIM]; 5];
        for i in 0..DIM {
            let dy = y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            rcont[0][i] = y[i];
            rcont[1][i] = dy;
            rcont[2][i] = bspl;
            rcont[3][i] = dy - h * k7[i] - bspl;
            rcont[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let step = DenseStep { t0: t, h, rcont };

        if !meridian && y[2] != 0.0 && y[2].signum() != y_new[2].signum() {
            let tt = bisect(|x| step.eval(x)[2], t, t + h, 0.0).unwrap_or(t + h);
            turns.push(Turn {
                t: tt,
                s: step.eval(tt)[0],
            });
        }
        steps.push(step);
        y = y_new;
        k1 = k7;
        t = if last { t_end } else { t + h };

        let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
    }

    Ok(Trajectory {
        steps,
        meridian,
        length,
        t_end,
        turns,
        rejected_steps: rejected,
    })
}

/// `(1/T) ∫_0^T q(flow_t(state0)) dt`.
pub fn flow_average(
    profile: &SurfaceProfile,
    obs: &Observable,
    state0: FlowState,
    t_end: f64,
    ode_tol: f64,
) -> Result<f64> {
    if t_end <= 0.0 {
        return Err(Error::InvalidInput(format!("averaging time T = {t_end} must be positive")));
    }
    let traj = integrate_with(profile, Some(obs), state0, t_end, FlowOptions::new(ode_tol))?;
    Ok(traj.integral_at(t_end) / t_end)
}

//! Tanh-sinh (double-exponential) quadrature.
//!
//! The substitution `x = mid + half * tanh(pi/2 * sinh t)` clusters nodes
//! doubly-exponentially at both endpoints, so integrands with algebraic
//! endpoint singularities such as `(x - a)^{-1/2}` converge at the same rate
//! as smooth ones. Each node also carries its exact distance to the nearer
//! endpoints; integrands that have to form a difference like `f(x) - f(a)`
//! should use those distances instead of `x - a`, which loses every digit
//! once the node is within a few ulps of the endpoint.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Abscissa together with its distances to the two endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_left: f64,
    pub from_right: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Difference between the last two refinement levels. The returned value
    /// is typically far more accurate than this.
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    /// Relative tolerance, measured against the integral of `|f|`.
    pub tol: f64,
    pub max_level: u32,
    pub min_level: u32,
    /// Truncation of the `t` axis. At `t = 6` the node weights are below
    /// `1e-270`.
    pub t_max: f64,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_level: 10,
            min_level: 3,
            t_max: 6.0,
        }
    }
}

impl TanhSinh {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Integrate a plain function of `x` over `[a, b]`.
    pub fn integrate<F>(&self, f: F, a: f64, b: f64) -> Result<QuadResult>
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_nodes(|n| f(n.x), a, b)
    }

    /// Integrate an integrand that receives the full [`Node`].
    pub fn integrate_nodes<F>(&self, f: F, a: f64, b: f64) -> Result<QuadResult>
    where
        F: Fn(Node) -> f64,
    {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "quadrature limits must be finite, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
            });
        }
        if b < a {
            let r = self.ordered(
                |n| {
                    f(Node {
                        x: n.x,
                        from_left: n.from_right,
                        from_right: n.from_left,
                    })
                },
                b,
                a,
            )?;
            return Ok(QuadResult {
                value: -r.value,
                ..r
            });
        }
        self.ordered(f, a, b)
    }

    fn ordered<F>(&self, f: F, a: f64, b: f64) -> Result<QuadResult>
    where
        F: Fn(Node) -> f64,
    {

        let half = 0.5 * (b - a);
        let mid = a + half;
        let width = b - a;

        let f0 = f(Node {
            x: mid,
            from_left: half,
            from_right: half,
        });
        if !f0.is_finite() {
            return Err(Error::QuadratureFailure {
                tol: self.tol,
                estimate: f64::INFINITY,
            });
        }
        let mut evaluations = 1usize;
        let mut eval_pair = |t: f64, sum: &mut f64, abs_sum: &mut f64| -> Result<()> {
            let v = FRAC_PI_2 * t.sinh();
            // 1 - tanh(v) and sech^2(v), both free of cancellation for large v.
            let e = (-2.0 * v).exp();
            let comp = 2.0 * e / (1.0 + e);
            let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
            let w = FRAC_PI_2 * t.cosh() * sech2;
            if w == 0.0 {
                return Ok(());
            }
            let d = half * comp;
            if d == 0.0 {
                return Ok(());
            }
            let right = Node {
                x: (b - d).max(a),
                from_left: width - d,
                from_right: d,
            };
            let left = Node {
                x: (a + d).min(b),
                from_left: d,
                from_right: width - d,
            };
            let fr = f(right);
            let fl = f(left);
            evaluations += 2;
            if !(fr.is_finite() && fl.is_finite()) {
                return Err(Error::QuadratureFailure {
                    tol: self.tol,
                    estimate: f64::INFINITY,
                });
            }
            *sum += w * (fr + fl);
            *abs_sum += w * (fr.abs() + fl.abs());
            Ok(())
        };

        // Level 0: step 1, nodes at integer t.
        let mut step = 1.0;
        let mut sum = FRAC_PI_2 * f0;
        let mut abs_sum = FRAC_PI_2 * f0.abs();
        let mut k = 1;
        while (k as f64) * step <= self.t_max {
            eval_pair(k as f64 * step, &mut sum, &mut abs_sum)?;
            k += 1;
        }
        let mut prev = half * step * sum;
        let mut last_err = f64::INFINITY;

        for level in 1..=self.max_level {
            step *= 0.5;
            let mut k = 1usize;
            while (k as f64) * step <= self.t_max {
                eval_pair(k as f64 * step, &mut sum, &mut abs_sum)?;
                k += 2;
            }
            let value = half * step * sum;
            let scale = (half * step * abs_sum).max(f64::MIN_POSITIVE);
            let err = (value - prev).abs();
            last_err = err;
            if level >= self.min_level && err <= self.tol * scale {
                return Ok(QuadResult {
                    value,
                    error_estimate: err,
                    evaluations,
                });
            }
            prev = value;
        }
        Err(Error::QuadratureFailure {
            tol: self.tol,
            estimate: last_err,
        })
    }
}

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Nodes and weights of the five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre5_nodes(a: f64, b: f64) -> [(f64, f64); 5] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    std::array::from_fn(|i| (c + r * GL5_X[i], r * GL5_W[i]))
}

/// Fixed five-point Gauss-Legendre rule on `[a, b]`, used for per-step
/// integration along dense ODE output.
pub fn gauss_legendre5<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    gauss_legendre5_nodes(a, b).iter().map(|&(x, w)| w * f(x)).sum()
}

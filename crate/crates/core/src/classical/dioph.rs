//! Continued-fraction classification of rotation numbers.
//!
//! Whether a real number is Diophantine cannot be decided from a float. The
//! operational test here walks the convergents `p_k/q_k` up to `q_max` and
//! asks whether any of them is closer than `1/(c0 q^n0)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophParams {
    pub c0: f64,
    pub n0: f64,
    pub q_max: f64,
    pub rational_tol: f64,
}

impl Default for DiophParams {
    fn default() -> Self {
        Self {
            c0: 10.0,
            n0: 3.0,
            q_max: 1e5,
            rational_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiophantineKind {
    Rational { p: i64, q: i64 },
    NumericallyDiophantine,
    Undecided,
}

impl DiophantineKind {
    pub fn label(&self) -> &'static str {
        match self {
            DiophantineKind::Rational { .. } => "rational",
            DiophantineKind::NumericallyDiophantine => "numerically_diophantine",
            DiophantineKind::Undecided => "undecided",
        }
    }

    pub fn as_rational(&self) -> Option<(i64, i64)> {
        match *self {
            DiophantineKind::Rational { p, q } => Some((p, q)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineClass {
    pub kind: DiophantineKind,
    pub params: DiophParams,
}

/// Convergents `p_k/q_k` of `x` with `q_k <= q_max`, in order.
pub fn convergents(x: f64, q_max: f64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut p2, mut q2) = (0i64, 1i64);
    let (mut p1, mut q1) = (1i64, 0i64);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let q_next = a * q1 as f64 + q2 as f64;
        if q_next > q_max || a.abs() > 9.0e15 {
            break;
        }
        let a_i = a as i64;
        let p = a_i * p1 + p2;
        let q = a_i * q1 + q2;
        out.push((p, q));
        let frac = rem - a;
        if frac <= 0.0 {
            break;
        }
        rem = 1.0 / frac;
        (p2, q2, p1, q1) = (p1, q1, p, q);
    }
    out
}

pub fn diophantine_class(omega: f64, params: DiophParams) -> DiophantineClass {
    let conv = convergents(omega, params.q_max);
    let kind = if let Some(&(p, q)) = conv
        .iter()
        .find(|&&(p, q)| (omega - p as f64 / q as f64).abs() < params.rational_tol)
    {
        DiophantineKind::Rational { p, q }
    } else if !conv.is_empty()
        && conv.iter().all(|&(p, q)| {
            let q = q as f64;
            (omega - p as f64 / q).abs() >= 1.0 / (params.c0 * q.powf(params.n0))
        })
    {
        DiophantineKind::NumericallyDiophantine
    } else {
        DiophantineKind::Undecided
    };
    DiophantineClass { kind, params }
}

pub fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

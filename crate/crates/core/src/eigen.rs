//! Eigenvalue routines for the per-mode operators.
//!
//! The symmetrized mode matrices are complex *symmetric* (`T = Tᵀ`, not
//! Hermitian) and tridiagonal. [`complex_symmetric_ql`] runs implicit QL with
//! complex orthogonal rotations on them in `O(n²)`. Those rotations are not
//! unitary, so every solve is followed by a residual check through inverse
//! iteration ([`backward_error`]). [`hessenberg_qr`] is a plain unitary
//! shifted QR for small dense non-Hermitian matrices; it serves the
//! companion linearization of the damped wave problem and as a reference in
//! tests. [`sturm_bisection`] brackets real symmetric spectra exactly.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigensolveConfig {
    /// Accepted backward error as a multiple of `u · n`, with `u` the unit
    /// roundoff, relative to `‖T‖∞`.
    pub backward_error_bound: f64,
    /// QL/QR sweeps allowed per eigenvalue.
    pub max_iterations: usize,
    /// Off-diagonal entries below `deflation_tol · (|d_k| + |d_k+1|)` are
    /// set to zero.
    pub deflation_tol: f64,
    /// Eigenvalues per matrix whose backward error is checked.
    pub residual_samples: usize,
}

impl Default for EigensolveConfig {
    fn default() -> Self {
        Self {
            backward_error_bound: 100.0,
            max_iterations: 60,
            deflation_tol: f64::EPSILON,
            residual_samples: 8,
        }
    }
}

impl EigensolveConfig {
    pub fn residual_limit(&self, n: usize) -> f64 {
        self.backward_error_bound * 0.5 * f64::EPSILON * n.max(1) as f64
    }
}

fn l1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// All eigenvalues of the complex symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (`e[i] = T[i, i+1] = T[i+1, i]`).
pub fn complex_symmetric_ql(d: &[C64], e: &[C64], cfg: &EigensolveConfig) -> Result<Vec<C64>> {
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if e.len() + 1 != n {
        return Err(Error::InvalidInput(format!(
            "off-diagonal has length {}, expected {}",
            e.len(),
            n - 1
        )));
    }
    let mut d = d.to_vec();
    // e[n-1] is a sentinel zero.
    let mut e: Vec<C64> = e.iter().copied().chain(std::iter::once(C64::new(0.0, 0.0))).collect();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut saved_d = Vec::new();
    let mut saved_e = Vec::new();

    for l in 0..n {
        let mut iter = 0usize;
        let mut exceptional = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = l1(d[m]) + l1(d[m + 1]);
                if l1(e[m]) <= cfg.deflation_tol * dd || e[m] == zero {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > cfg.max_iterations {
                return Err(Error::ConvergenceFailure(format!(
                    "complex symmetric QL: eigenvalue {l} of {n} not converged after {} sweeps",
                    cfg.max_iterations
                )));
            }

            // Shift: eigenvalue of the leading 2×2 block nearer to d[l].
            let mut g = (d[l + 1] - d[l]) / (e[l] * 2.0);
            let r = (g * g + one).sqrt();
            let gr = if (g + r).norm_sqr() >= (g - r).norm_sqr() { g + r } else { g - r };
            g = d[m] - d[l] + e[l] / gr;
            if exceptional > 0 {
                // Perturb the shift after a breakdown.
                g += e[l] * C64::new(0.75, 0.4) * exceptional as f64;
            }

            saved_d.clear();
            saved_d.extend_from_slice(&d[l..=m]);
            saved_e.clear();
            saved_e.extend_from_slice(&e[l..=m]);

            let (mut s, mut c, mut p) = (one, one, zero);
            let mut broke = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                let r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if l1(r) <= f64::EPSILON * (l1(f) + l1(g)) {
                    if l1(f) + l1(g) == 0.0 {
                        // The block has already split at i+1.
                        d[i + 1] -= p;
                        e[m] = zero;
                    } else {
                        broke = true;
                    }
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let r = (d[i] - g) * s + c * b * 2.0;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if i == l {
                    d[l] -= p;
                    e[l] = g;
                    e[m] = zero;
                }
            }
            if broke {
                // Isotropic rotation vector (f² + g² = 0): undo the partial
                // sweep and retry with a different shift.
                d[l..=m].copy_from_slice(&saved_d);
                e[l..=m].copy_from_slice(&saved_e);
                exceptional += 1;
            }
        }
    }
    if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure("complex symmetric QL produced non-finite values".into()));
    }
    Ok(d)
}

/// `‖T‖∞` of a symmetric tridiagonal matrix.
pub fn tridiagonal_norm(d: &[C64], e: &[C64]) -> f64 {
    (0..d.len())
        .map(|i| {
            let left = if i > 0 { e[i - 1].norm() } else { 0.0 };
            let right = if i < e.len() { e[i].norm() } else { 0.0 };
            left + d[i].norm() + right
        })
        .fold(0.0, f64::max)
}

/// Solve a general tridiagonal system by Gaussian elimination with partial
/// pivoting. `sub[i] = A[i+1, i]`, `sup[i] = A[i, i+1]`. Exactly zero pivots
/// are replaced by `ε‖A‖`, which is what inverse iteration needs.
pub fn solve_tridiagonal(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Vec<C64> {
    let n = diag.len();
    let zero = C64::new(0.0, 0.0);
    if n == 0 {
        return Vec::new();
    }
    let scale = diag
        .iter()
        .chain(sub)
        .chain(sup)
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tiny = C64::new(f64::EPSILON * scale, 0.0);
    let mut d = diag.to_vec();
    let mut u1: Vec<C64> = sup.to_vec();
    u1.push(zero);
    let mut u2 = vec![zero; n];
    let mut x = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        let l = sub[i];
        if d[i].norm_sqr() >= l.norm_sqr() {
            if d[i] == zero {
                d[i] = tiny;
            }
            let m = l / d[i];
            d[i + 1] -= m * u1[i];
            u1[i + 1] -= m * u2[i];
            let xi = x[i];
            x[i + 1] -= m * xi;
        } else {
            let m = d[i] / l;
            let next_u1 = u1[i + 1];
            let r1 = u1[i] - m * d[i + 1];
            let r2 = u2[i] - m * next_u1;
            d[i] = l;
            u1[i] = d[i + 1];
            u2[i] = next_u1;
            d[i + 1] = r1;
            u1[i + 1] = r2;
            x.swap(i, i + 1);
            let xi = x[i];
            x[i + 1] -= m * xi;
        }
    }
    if d[n - 1] == zero {
        d[n - 1] = tiny;
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        if i + 1 < n {
            v -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= u2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    x
}

/// Multiply the symmetric tridiagonal `(d, e)` shifted by `-z` with `v`.
pub fn tridiagonal_apply(d: &[C64], e: &[C64], z: C64, v: &[C64]) -> Vec<C64> {
    let n = d.len();
    (0..n)
        .map(|i| {
            let mut y = (d[i] - z) * v[i];
            if i > 0 {
                y += e[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                y += e[i] * v[i + 1];
            }
            y
        })
        .collect()
}

fn normalize(v: &mut [C64]) -> f64 {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for z in v.iter_mut() {
            *z /= nrm;
        }
    }
    nrm
}

/// Normwise backward error `min_x ‖(T − z)x‖ / (‖T‖ ‖x‖)` estimated by two
/// steps of inverse iteration.
pub fn backward_error(d: &[C64], e: &[C64], z: C64) -> f64 {
    let n = d.len();
    let norm = tridiagonal_norm(d, e).max(f64::MIN_POSITIVE);
    let diag: Vec<C64> = d.iter().map(|&x| x - z).collect();
    // A start vector without special structure.
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.5 * (0.7 * i as f64).sin(), 0.25 * (1.3 * i as f64).cos()))
        .collect();
    normalize(&mut v);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        v = solve_tridiagonal(e, &diag, e, &v);
        if normalize(&mut v) == 0.0 || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break;
        }
        let r = tridiagonal_apply(d, e, z, &v);
        let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / norm;
        best = best.min(res);
    }
    best
}

/// Check the backward error of up to `cfg.residual_samples` eigenvalues,
/// spread evenly through `eigs`. Returns the largest one seen.
pub fn check_residuals(d: &[C64], e: &[C64], eigs: &[C64], cfg: &EigensolveConfig) -> Result<f64> {
    if eigs.is_empty() || cfg.residual_samples == 0 {
        return Ok(0.0);
    }
    let k = cfg.residual_samples.min(eigs.len());
    let mut worst: f64 = 0.0;
    for j in 0..k {
        let idx = if k == 1 { 0 } else { j * (eigs.len() - 1) / (k - 1) };
        worst = worst.max(backward_error(d, e, eigs[idx]));
    }
    let limit = cfg.residual_limit(d.len());
    if worst > limit {
        return Err(Error::ConvergenceFailure(format!(
            "backward error {worst:e} exceeds {limit:e}"
        )));
    }
    Ok(worst)
}

/// Number of eigenvalues of the real symmetric tridiagonal `(d, e)` that are
/// strictly below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i > 0 { e[i - 1] * e[i - 1] / q } else { 0.0 };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues of a real symmetric tridiagonal matrix in `[lo, hi)` by
/// bisection on the Sturm count, to absolute accuracy `tol`.
pub fn sturm_bisection(d: &[f64], e: &[f64], lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let c_lo = sturm_count(d, e, lo);
    let c_hi = sturm_count(d, e, hi);
    let mut out = Vec::with_capacity(c_hi.saturating_sub(c_lo));
    for k in c_lo..c_hi {
        // k-th eigenvalue (0-based): count(x) > k  ⇔  λ_k < x.
        let (mut a, mut b) = (lo, hi);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(d, e, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn to_hessenberg(a: &mut DenseMatrix) {
    let n = a.n;
    for k in 0..n.saturating_sub(2) {
        let alpha_norm = ((k + 1)..n).map(|i| a.at(i, k).norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = a.at(k + 1, k);
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * alpha_norm;
        let mut v: Vec<C64> = ((k + 1)..n).map(|i| a.at(i, k)).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vn;
        }
        // A ← (I − 2vvᴴ) A on rows k+1..n.
        for j in k..n {
            let s: C64 = v.iter().enumerate().map(|(r, vr)| vr.conj() * a.at(k + 1 + r, j)).sum();
            for (r, vr) in v.iter().enumerate() {
                *a.at_mut(k + 1 + r, j) -= *vr * s * 2.0;
            }
        }
        // A ← A (I − 2vvᴴ) on columns k+1..n.
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(c, vc)| a.at(i, k + 1 + c) * vc).sum();
            for (c, vc) in v.iter().enumerate() {
                *a.at_mut(i, k + 1 + c) -= s * vc.conj() * 2.0;
            }
        }
        for i in (k + 2)..n {
            *a.at_mut(i, k) = C64::new(0.0, 0.0);
        }
    }
}

/// All eigenvalues of a dense complex matrix: Hessenberg reduction followed
/// by single-shift QR with Givens rotations and Wilkinson shifts.
pub fn hessenberg_qr(mut a: DenseMatrix, cfg: &EigensolveConfig) -> Result<Vec<C64>> {
    let n = a.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    to_hessenberg(&mut a);
    let mut eig = vec![C64::new(0.0, 0.0); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut rots: Vec<(C64, C64)> = Vec::with_capacity(n);
    loop {
        if hi == 0 {
            eig[0] = a.at(0, 0);
            break;
        }
        let mut lo = hi;
        while lo > 0 {
            let sub = a.at(lo, lo - 1);
            let scale = l1(a.at(lo - 1, lo - 1)) + l1(a.at(lo, lo));
            if l1(sub) <= cfg.deflation_tol * scale.max(f64::MIN_POSITIVE) {
                *a.at_mut(lo, lo - 1) = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = a.at(hi, hi);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > cfg.max_iterations {
            return Err(Error::ConvergenceFailure(format!(
                "Hessenberg QR: eigenvalue {hi} of {n} not converged after {} sweeps",
                cfg.max_iterations
            )));
        }
        let mu = if iter.is_multiple_of(11) {
            a.at(hi, hi) + C64::new(a.at(hi, hi - 1).norm() * 0.75, 0.0)
        } else {
            let (p, q, r, s) = (a.at(hi - 1, hi - 1), a.at(hi - 1, hi), a.at(hi, hi - 1), a.at(hi, hi));
            let half = (p - s) * 0.5;
            let disc = (half * half + q * r).sqrt();
            let mean = (p + s) * 0.5;
            let e1 = mean + disc;
            let e2 = mean - disc;
            if (e1 - s).norm() <= (e2 - s).norm() {
                e1
            } else {
                e2
            }
        };
        for k in lo..=hi {
            *a.at_mut(k, k) -= mu;
        }
        rots.clear();
        for k in lo..hi {
            let x = a.at(k, k);
            let y = a.at(k + 1, k);
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            } else {
                (x / r, y / r)
            };
            for j in k..=hi {
                let u = a.at(k, j);
                let w = a.at(k + 1, j);
                *a.at_mut(k, j) = c.conj() * u + s.conj() * w;
                *a.at_mut(k + 1, j) = -s * u + c * w;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            for i in lo..=(k + 1).min(hi) {
                let u = a.at(i, k);
                let w = a.at(i, k + 1);
                *a.at_mut(i, k) = u * c + w * s;
                *a.at_mut(i, k + 1) = -u * s.conj() + w * c.conj();
            }
        }
        for k in lo..=hi {
            *a.at_mut(k, k) += mu;
        }
    }
    Ok(eig)
}

/// Sort complex numbers by real part, then imaginary part.
pub fn sort_by_re(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

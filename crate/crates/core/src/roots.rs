//! Bracketing root finders and a golden-section minimizer.

use crate::error::{Error, Result};

/// Bisection on a sign change of `f` over `[lo, hi]`.
///
/// Runs until the bracket is narrower than `xtol` or cannot shrink any
/// further in floating point, so `xtol = 0.0` yields the root to the last ulp.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::RootBracketFailure {
            lo,
            hi,
            context: format!("f(lo) = {flo:e}, f(hi) = {fhi:e}"),
        });
    }
    for _ in 0..2100 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        if x1 >= x2 {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

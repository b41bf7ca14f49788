//! Bracketed scalar root finding: bisection with secant acceleration that
//! never leaves the bracket, so convergence is guaranteed.

use crate::error::{Error, Result};

/// Find `x` in `[lo, hi]` with `f(x) = 0`, given `f(lo) * f(hi) <= 0`.
///
/// Every iteration at least halves the bracket (one bisection probe), and a
/// secant candidate strictly inside the surviving half may shrink it further.
/// Terminates when the bracket width drops below `tol`.
pub fn find_root_bracketed<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("bracket [{lo}, {hi}] is not increasing")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidInput(format!(
            "invalid bracket: f({a}) = {fa} and f({b}) = {fb} have the same sign"
        )));
    }

    for _ in 0..4096 {
        if b - a <= tol {
            break;
        }
        // guaranteed bisection step
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break; // bracket at floating-point resolution
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        // secant candidate within the surviving half
        if b - a <= tol {
            break;
        }
        let denom = fb - fa;
        if denom != 0.0 {
            let xs = b - fb * (b - a) / denom;
            let margin = 0.01 * (b - a);
            if xs > a + margin && xs < b - margin {
                let fs = f(xs);
                if fs == 0.0 {
                    return Ok(xs);
                }
                if fs.signum() == fa.signum() {
                    a = xs;
                    fa = fs;
                } else {
                    b = xs;
                    fb = fs;
                }
            }
        }
    }
    Ok(0.5 * (a + b))
}

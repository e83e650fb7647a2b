//! Bracketed root finding for monotone scalar maps.

use crate::error::{Error, Result};

/// Solve `g(t) = target` for a nondecreasing `g` given `g(lo) <= target <= g(hi)`.
///
/// Illinois false position, with a bisection step whenever the secant guess
/// fails to shrink the bracket by half. Stops when the residual is below
/// `rtol * |target|` or the bracket is narrower than `rtol * t`.
pub fn solve_increasing<G>(g: G, target: f64, lo: f64, hi: f64, rtol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let ftol = rtol * target.abs().max(f64::MIN_POSITIVE);
    solve_increasing_tol(g, target, lo, hi, ftol, rtol, 0.0)
}

/// As [`solve_increasing`] with an absolute residual tolerance `ftol` and a
/// bracket tolerance `xrtol * |t| + xatol`.
pub fn solve_increasing_tol<G>(g: G, target: f64, mut lo: f64, mut hi: f64, ftol: f64, xrtol: f64, xatol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    let mut glo = g(lo) - target;
    let mut ghi = g(hi) - target;
    if glo.abs() <= ftol {
        return Ok(lo);
    }
    if ghi.abs() <= ftol {
        return Ok(hi);
    }
    if glo > 0.0 || ghi < 0.0 || !glo.is_finite() || !ghi.is_finite() {
        return Err(Error::NonConvergence(format!(
            "bracket [{lo:e}, {hi:e}] does not contain a root (g-s = {glo:e}, {ghi:e})"
        )));
    }
    // side: -1 if lo was retained last time, +1 if hi was retained.
    let mut side = 0i8;
    for _ in 0..400 {
        let width = hi - lo;
        let mut t = (lo * ghi - hi * glo) / (ghi - glo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let gt = g(t) - target;
        if gt.abs() <= ftol {
            return Ok(t);
        }
        if gt < 0.0 {
            lo = t;
            glo = gt;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            ghi = gt;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.5 * width {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid) - target;
            if gm.abs() <= ftol {
                return Ok(mid);
            }
            if gm < 0.0 {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
                ghi = gm;
            }
            side = 0;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xrtol * mid.abs() + xatol || hi - lo <= 4.0 * f64::EPSILON * mid.abs() {
            return Ok(mid);
        }
    }
    Err(Error::NonConvergence("root iteration limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let t = solve_increasing(|x| x * x * x, 27.0, 0.0, 10.0, 1e-14).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_bracket() {
        assert!(solve_increasing(|x| x, 5.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn steep_map() {
        let t = solve_increasing(|x| x.powf(12.0), 1e-30, 0.0, 1.0, 1e-13).unwrap();
        assert!((t.powf(12.0) / 1e-30 - 1.0).abs() < 1e-12);
    }
}

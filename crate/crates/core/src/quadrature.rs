//! Adaptive Gauss–Kronrod quadrature with dyadic panel refinement toward
//! weakly singular endpoints and toward infinity.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: value, error estimate, and whether the
/// requested tolerance was reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Fixed 15-point Kronrod rule with the embedded 7-point Gauss estimate.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection on the interval with the largest error.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut splits = 0;
    while err > abs_tol.max(rel_tol * total.abs()) && splits < 4000 {
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.a, m);
        let (v2, e2) = gk15(f, m, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Interval { a: m, b: worst.b, value: v2, error: e2 });
        splits += 1;
    }
    // Resum in a fixed order so the value does not depend on heap history.
    let mut parts: Vec<Interval> = heap.into_vec();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = 0.0;
    let mut error = 0.0;
    for p in &parts {
        value += p.value;
        error += p.error;
    }
    Quad { value, error, converged: error <= abs_tol.max(rel_tol * value.abs()) * 1.000_001 }
}

/// Integral over `[a, b]` of an integrand that may blow up like
/// `(t - a)^(-gamma)` with `gamma < 1` at the left endpoint.
///
/// Panels `[a + d/2^(k+1), a + d/2^k]` are integrated adaptively. Once the
/// ratio of successive panel integrals has settled, the remaining tail is
/// summed as a geometric series (the ratio is `2^(gamma - 1)` for a pure
/// power law).
pub fn singular_left<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<Quad> {
    if b <= a {
        return Ok(Quad { value: 0.0, error: 0.0, converged: true });
    }
    let d = b - a;
    let mut total = 0.0;
    let mut error = 0.0;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stable = 0;
    for k in 0..1000 {
        let hi = a + d * 0.5f64.powi(k);
        let lo = a + d * 0.5f64.powi(k + 1);
        let q = adaptive(f, lo, hi, 0.0, rel_tol * 0.1);
        total += q.value;
        error += q.error;
        if !q.value.is_finite() {
            return Err(Error::Divergence("non-finite panel near singular endpoint".into()));
        }
        if q.value == 0.0 && prev == Some(0.0) {
            return Ok(Quad { value: total, error, converged: true });
        }
        if let Some(p) = prev {
            if p != 0.0 {
                let ratio = q.value / p;
                if let Some(pr) = prev_ratio {
                    // Floor at a few ulps: panel values carry roundoff of that size.
                    let thresh = (1e-3 * rel_tol * (1.0 - ratio).abs()).max(64.0 * f64::EPSILON);
                    if (ratio - pr).abs() <= thresh {
                        stable += 1;
                    } else {
                        stable = 0;
                    }
                }
                prev_ratio = Some(ratio);
                // Past ~2^-500 of the interval, powers of t underflow; close with the last ratio.
                if ratio > 0.0 && ratio < 1.0 && (stable >= 2 || k >= 500) {
                    let tail = q.value * ratio / (1.0 - ratio);
                    let tail_err = tail.abs() * 1e-3 * rel_tol;
                    return Ok(Quad { value: total + tail, error: error + tail_err, converged: true });
                }
                if q.value.abs() <= 1e-17 * total.abs() && k > 4 {
                    return Ok(Quad { value: total, error, converged: true });
                }
                if ratio >= 1.0 && k > 8 {
                    return Err(Error::Divergence(format!(
                        "panel ratio {ratio} >= 1 approaching the endpoint"
                    )));
                }
            }
        }
        prev = Some(q.value);
    }
    Ok(Quad { value: total, error, converged: false })
}

/// Integral over `[a, +inf)` of `h`, taking the integrand in the log variable:
/// `h(x)` must equal `g(e^x) e^x` for the original integrand `g`.
///
/// Panels of width `ln 2` in `x` (doubling in the radius). Convergence is
/// declared when three successive panels each contribute below
/// `1e-14` of the running total, or when the panel ratio settles below one,
/// in which case the geometric tail is added. Growing panels signal divergence.
pub fn to_infinity_log<H: Fn(f64) -> f64>(h: &H, x0: f64, rel_tol: f64) -> Result<Quad> {
    let w = std::f64::consts::LN_2;
    let mut total = 0.0;
    let mut error = 0.0;
    let mut small_run = 0;
    let mut growing = 0;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stable = 0;
    for k in 0..1000 {
        let lo = x0 + w * k as f64;
        let q = adaptive(h, lo, lo + w, 0.0, rel_tol * 0.1);
        if !q.value.is_finite() {
            return Err(Error::Divergence("non-finite panel in tail".into()));
        }
        total += q.value;
        error += q.error;
        if q.value.abs() < 1e-14 * total.abs() || (q.value == 0.0 && total == 0.0) {
            small_run += 1;
            if small_run >= 3 {
                return Ok(Quad { value: total, error, converged: true });
            }
        } else {
            small_run = 0;
        }
        if let Some(p) = prev {
            if p != 0.0 && q.value != 0.0 {
                let ratio = q.value / p;
                if ratio.abs() >= 1.0 {
                    growing += 1;
                    if growing >= 3 && k >= 6 {
                        return Err(Error::Divergence("tail panels do not decrease".into()));
                    }
                } else {
                    growing = 0;
                }
                if let Some(pr) = prev_ratio {
                    if (ratio - pr).abs() <= 1e-3 * rel_tol * (1.0 - ratio).abs() {
                        stable += 1;
                    } else {
                        stable = 0;
                    }
                }
                prev_ratio = Some(ratio);
                if stable >= 3 && ratio > 0.0 && ratio < 1.0 - 1e-6 {
                    let tail = q.value * ratio / (1.0 - ratio);
                    return Ok(Quad {
                        value: total + tail,
                        error: error + tail.abs() * 1e-3 * rel_tol,
                        converged: true,
                    });
                }
            }
        }
        prev = Some(q.value);
    }
    Err(Error::Divergence("tail test not passed within 1000 doublings".into()))
}

/// Integral over `[a, b]`, `0 < a < b`, split into dyadic panels in the radius.
pub fn dyadic<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Quad {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    let mut lo = a;
    while lo < b {
        let hi = if a > 0.0 { (2.0 * lo).min(b) } else { b };
        let q = adaptive(f, lo, hi, 0.0, rel_tol * 0.1);
        total += q.value;
        error += q.error;
        converged &= q.converged || q.error <= rel_tol * total.abs();
        lo = hi;
    }
    Quad { value: total, error, converged }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..m {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = m as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk_polynomial_exact() {
        let (v, _) = gk15(&|x: f64| x.powi(9) - 2.0 * x * x, 0.0, 2.0);
        assert_relative_eq!(v, 1024.0 / 10.0 - 16.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_oscillatory() {
        let q = adaptive(&|x: f64| (10.0 * x).sin(), 0.0, 3.0, 0.0, 1e-13);
        assert_relative_eq!(q.value, (1.0 - 30f64.cos()) / 10.0, max_relative = 1e-12);
    }

    #[test]
    fn weak_singularity() {
        for gamma in [0.0, 0.3, 0.7, 0.95] {
            let q = singular_left(&|t: f64| t.powf(-gamma), 0.0, 3.0, 1e-12).unwrap();
            let exact = 3f64.powf(1.0 - gamma) / (1.0 - gamma);
            assert_relative_eq!(q.value, exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn singular_with_smooth_factor() {
        let q = singular_left(&|t: f64| t.powf(-0.5) * (1.0 + t), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(q.value, 2.0 + 2.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn infinite_power_tail() {
        // g(r) = r^-2.6, integral from 1 = 1/1.6
        let h = |x: f64| (-1.6 * x).exp();
        let q = to_infinity_log(&h, 0.0, 1e-12).unwrap();
        assert_relative_eq!(q.value, 1.0 / 1.6, max_relative = 1e-11);
    }

    #[test]
    fn infinite_divergent() {
        let h = |x: f64| (0.1 * x).exp();
        assert!(to_infinity_log(&h, 0.0, 1e-12).is_err());
        let flat = |_x: f64| 1.0;
        assert!(to_infinity_log(&flat, 0.0, 1e-12).is_err());
    }

    #[test]
    fn legendre_rule() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, max_relative = 1e-13);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }
}

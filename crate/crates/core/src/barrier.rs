//! Radial supersolution families `v_a` and their certified two-sided bounds.
//!
//! Each family is `v_a(r) = int phi^{-1}(F(t) / t^(n-1)) dt` from its left
//! endpoint, where the flux `F` satisfies `F' = -g t^(n-1)` for a radial
//! majorant `g` of the source:
//!
//! * `Lemma1`: ball of radius `R`, `g == f_sup`, `F(t) = C - f_sup t^n / n`.
//! * `Lemma2`: whole space, `g = C_f` on `r <= 1` and `C_f r^-(p+eps)` beyond.
//! * `Lemma1Prime`: `Lemma1` on `B_R(x0)`, `|x0| = 2R`, with `f_sup = C_f R^-(p+eps)`.
//! * `Lemma2Prime`: exterior `[R, inf)`, `g = C_f r^-(p+eps)`, `v(R) = 0`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{domain, precondition, Result};
use crate::operator::{OperatorSpec, PHI_INV_TOL};
use crate::quadrature::{adaptive, dyadic, singular_left, to_infinity_log};
use crate::source::{Decay, SourceTerm};

const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    Lemma1,
    Lemma2,
    Lemma1Prime,
    Lemma2Prime,
}

/// One member `v_a` of a barrier family.
#[derive(Debug)]
pub struct Barrier {
    pub family: Family,
    pub spec: OperatorSpec,
    pub a: f64,
    /// `|x0|` for `Lemma1Prime` (`2R`), else 0.
    pub center_radius: f64,
    /// Ball radius (`Lemma1`, `Lemma1Prime`) or inner radius (`Lemma2Prime`); 1 for `Lemma2`.
    pub radius: f64,
    /// Flux at the family's reference radius: `t = 0` for the ball families,
    /// `t = 1` for `Lemma2` and `t = R` for `Lemma2Prime`.
    pub c_integration: f64,
    /// Constant majorant used on the ball families.
    pub f_sup: f64,
    pub decay: Option<Decay>,
    cache: OnceLock<Table>,
}

impl Clone for Barrier {
    fn clone(&self) -> Self {
        Barrier {
            family: self.family,
            spec: self.spec.clone(),
            a: self.a,
            center_radius: self.center_radius,
            radius: self.radius,
            c_integration: self.c_integration,
            f_sup: self.f_sup,
            decay: self.decay,
            cache: OnceLock::new(),
        }
    }
}

/// Certified bracket `lower <= v(r) <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

/// Result of the integrated-ODE residual check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `max |phi(v'(r)) r^(n-1) + int g s^(n-1) ds - C|` over the radii.
    pub max_abs_residual: f64,
    /// `min (g - f)` over the sampled points.
    pub min_source_gap: f64,
    pub supersolution: bool,
}

fn require_decay(f: &SourceTerm) -> Result<Decay> {
    f.decay.ok_or_else(|| precondition("source must be decay-tagged with (C_f, eps)"))
}

fn require_supercritical(spec: &OperatorSpec) -> Result<()> {
    if spec.p > spec.n as f64 {
        Ok(())
    } else {
        Err(precondition(format!("family needs p > n, got p={}, n={}", spec.p, spec.n)))
    }
}

/// Ball family on `B_R`: `v(r) = int_0^r phi^{-1}((f_sup/n)(R^n - t^n) t^(1-n) + a^(p-1) t^(1-n)) dt`.
pub fn make_lemma1(spec: &OperatorSpec, radius: f64, f_sup: f64, a: f64) -> Result<Barrier> {
    require_supercritical(spec)?;
    if !(radius > 0.0) || !(a >= 0.0) || !(f_sup >= 0.0) {
        return Err(precondition("need R > 0, a >= 0, f_sup >= 0"));
    }
    let n = spec.n as f64;
    let c = radius.powf(n) * f_sup / n + a.powf(spec.p - 1.0);
    Ok(Barrier {
        family: Family::Lemma1,
        spec: spec.clone(),
        a,
        center_radius: 0.0,
        radius,
        c_integration: c,
        f_sup,
        decay: None,
        cache: OnceLock::new(),
    })
}

/// Global family on `(0, inf)` for a decay-tagged source.
pub fn make_lemma2(spec: &OperatorSpec, f: &SourceTerm, a: f64) -> Result<Barrier> {
    require_supercritical(spec)?;
    let d = require_decay(f)?;
    if !(a >= 0.0) {
        return Err(precondition("need a >= 0"));
    }
    let c = d.c_f / (spec.p - spec.n as f64 + d.eps) + a.powf(spec.p - 1.0);
    Ok(Barrier {
        family: Family::Lemma2,
        spec: spec.clone(),
        a,
        center_radius: 0.0,
        radius: 1.0,
        c_integration: c,
        f_sup: d.c_f,
        decay: Some(d),
        cache: OnceLock::new(),
    })
}

/// Ball family on `B_R(x0)` with `|x0| = 2R`.
pub fn make_lemma1_prime(spec: &OperatorSpec, radius: f64, f: &SourceTerm, a: f64) -> Result<Barrier> {
    require_supercritical(spec)?;
    let d = require_decay(f)?;
    if !(radius >= 1.0) {
        return Err(precondition(format!("need R >= 1 so that B_R(x0) lies in the decay region, got {radius}")));
    }
    let f_sup = d.c_f * radius.powf(-spec.p - d.eps);
    let mut b = make_lemma1(spec, radius, f_sup, a)?;
    b.family = Family::Lemma1Prime;
    b.center_radius = 2.0 * radius;
    b.decay = Some(d);
    Ok(b)
}

/// Exterior family on `[R, inf)` with `v(R) = 0`, for `p >= n`.
pub fn make_lemma2_prime(spec: &OperatorSpec, radius: f64, f: &SourceTerm, a: f64) -> Result<Barrier> {
    if !(spec.p >= spec.n as f64) {
        return Err(precondition(format!("family needs p >= n, got p={}, n={}", spec.p, spec.n)));
    }
    let d = require_decay(f)?;
    if !(radius > 1.0) || !(a >= 0.0) {
        return Err(precondition("need R > 1 and a >= 0"));
    }
    let k = spec.p - spec.n as f64 + d.eps;
    let c = d.c_f / k * radius.powf(spec.n as f64 - spec.p - d.eps) + a.powf(spec.p - 1.0);
    Ok(Barrier {
        family: Family::Lemma2Prime,
        spec: spec.clone(),
        a,
        center_radius: 0.0,
        radius,
        c_integration: c,
        f_sup: d.c_f,
        decay: Some(d),
        cache: OnceLock::new(),
    })
}

impl Barrier {
    /// Left endpoint and right endpoint of the domain.
    pub fn domain(&self) -> (f64, f64) {
        match self.family {
            Family::Lemma1 | Family::Lemma1Prime => (0.0, self.radius),
            Family::Lemma2 => (0.0, f64::INFINITY),
            Family::Lemma2Prime => (self.radius, f64::INFINITY),
        }
    }

    fn ap(&self) -> f64 {
        self.a.powf(self.spec.p - 1.0)
    }

    /// Flux `F(t) = phi(v'(t)) t^(n-1)` in closed form.
    pub fn flux(&self, t: f64) -> f64 {
        let n = self.spec.n as f64;
        match self.family {
            Family::Lemma1 | Family::Lemma1Prime => self.c_integration - self.f_sup * t.powf(n) / n,
            Family::Lemma2 | Family::Lemma2Prime => {
                let d = self.decay.unwrap();
                let k = self.spec.p - n + d.eps;
                if self.family == Family::Lemma2 && t <= 1.0 {
                    self.c_integration + d.c_f / n * (1.0 - t.powf(n))
                } else {
                    d.c_f / k * t.powf(n - self.spec.p - d.eps) + self.ap()
                }
            }
        }
    }

    /// Radial majorant `g` the family is built for.
    pub fn majorant(&self, t: f64) -> f64 {
        match self.family {
            Family::Lemma1 | Family::Lemma1Prime => self.f_sup,
            Family::Lemma2 if t <= 1.0 => self.f_sup,
            Family::Lemma2 | Family::Lemma2Prime => {
                let d = self.decay.unwrap();
                d.c_f * t.powf(-self.spec.p - d.eps)
            }
        }
    }

    /// `v'(t)` from the closed integrand.
    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.flux(t) / t.powi(self.spec.n as i32 - 1);
        self.spec.phi_inverse(s.max(0.0), PHI_INV_TOL).unwrap_or(f64::NAN)
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let slack = 1e-14 * hi.min(1e300).max(1.0);
        if !(r >= lo - 1e-14 * lo.max(1.0)) || r > hi + slack {
            return Err(domain(format!("radius {r} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// `v_a(r)` by quadrature of the defining integral.
    pub fn eval(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        let (lo, hi) = self.domain();
        let r = r.clamp(lo, hi);
        if r == lo || (self.a == 0.0 && self.f_sup == 0.0) {
            return Ok(0.0);
        }
        let g = |t: f64| self.derivative(t);
        let v = match self.family {
            Family::Lemma1 | Family::Lemma1Prime => singular_left(&g, 0.0, r, QUAD_TOL)?.value,
            Family::Lemma2 => {
                if r <= 1.0 {
                    singular_left(&g, 0.0, r, QUAD_TOL)?.value
                } else {
                    singular_left(&g, 0.0, 1.0, QUAD_TOL)?.value + dyadic(&g, 1.0, r, QUAD_TOL).value
                }
            }
            Family::Lemma2Prime => dyadic(&g, self.radius, r, QUAD_TOL).value,
        };
        Ok(v)
    }

    /// `lim_{r -> inf} v_0(r)` for the unbounded families with `a = 0`;
    /// `None` otherwise (the limit is infinite for `a > 0`).
    pub fn limit_at_infinity(&self) -> Result<Option<f64>> {
        let start = match self.family {
            Family::Lemma2 => 1.0,
            Family::Lemma2Prime => self.radius,
            _ => return Ok(None),
        };
        if self.a > 0.0 {
            return Ok(None);
        }
        let head = if self.family == Family::Lemma2 { self.eval(1.0)? } else { 0.0 };
        if self.f_sup == 0.0 {
            return Ok(Some(0.0));
        }
        let h = |x: f64| {
            let t = x.exp();
            self.derivative(t) * t
        };
        Ok(Some(head + to_infinity_log(&h, start.ln(), QUAD_TOL)?.value))
    }

    /// Two-sided bound valid at `r`.
    pub fn bounds(&self, r: f64) -> Bounds {
        let sp = &self.spec;
        let e = 1.0 / (sp.p - 1.0);
        let alpha = sp.alpha();
        let n = sp.n as f64;
        let lo_c = (1.0 / sp.l_up).powf(e);
        let hi_c = (1.0 / sp.delta).powf(e);
        match self.family {
            Family::Lemma1 | Family::Lemma1Prime => {
                let w = r.powf(alpha) / alpha;
                let extra = (self.radius.powf(n) * self.f_sup / n).powf(e);
                Bounds { lower: lo_c * self.a * w, upper: hi_c * (self.a + extra) * w }
            }
            Family::Lemma2 => {
                let w = r.powf(alpha) / alpha;
                Bounds { lower: lo_c * self.a * w, upper: lemma2_c0(sp, self.decay.unwrap()) + hi_c * self.a * w }
            }
            Family::Lemma2Prime => {
                let d = self.decay.unwrap();
                let w = if sp.p == n {
                    r.ln() - self.radius.ln()
                } else {
                    (r.powf(alpha) - self.radius.powf(alpha)) / alpha
                };
                let beta = d.eps / (sp.p - 1.0);
                let tail = envelope_c0(sp, d) * (self.radius.powf(-beta) - r.powf(-beta));
                Bounds { lower: lo_c * self.a * w, upper: tail + hi_c * self.a * w }
            }
        }
    }

    /// Checks the integrated ODE `phi(v') r^(n-1) = C - int g s^(n-1) ds`
    /// and the majorant condition `g >= f` at the given radii.
    pub fn residual_check(&self, f: &SourceTerm, radii: &[f64]) -> Result<ResidualReport> {
        let n = self.spec.n as i32;
        let reference = match self.family {
            Family::Lemma1 | Family::Lemma1Prime => 0.0,
            Family::Lemma2 => 1.0,
            Family::Lemma2Prime => self.radius,
        };
        let weight = |s: f64| self.majorant(s) * s.powi(n - 1);
        let mut worst = 0.0f64;
        let mut gap = f64::INFINITY;
        for &r in radii {
            self.check_domain(r)?;
            if r == 0.0 {
                continue;
            }
            let vp = self.derivative(r);
            let lhs = self.spec.phi_signed(vp) * r.powi(n - 1);
            let integral = if r >= reference {
                integrate_split(&weight, reference, r)
            } else {
                -integrate_split(&weight, r, reference)
            };
            worst = worst.max((lhs + integral - self.c_integration).abs());
            for x in self.sample_points(r) {
                if let Some(fx) = source_value(f, x) {
                    gap = gap.min(self.majorant_at_point(x, r) - fx);
                }
            }
        }
        Ok(ResidualReport { max_abs_residual: worst, min_source_gap: gap, supersolution: gap >= -1e-12 * self.f_sup.max(1.0) })
    }

    // |x| for points at distance t from the family's centre.
    fn sample_points(&self, t: f64) -> Vec<f64> {
        if self.center_radius == 0.0 {
            vec![t]
        } else {
            let c = self.center_radius;
            vec![(c - t).abs(), c, c + t]
        }
    }

    fn majorant_at_point(&self, _x: f64, t: f64) -> f64 {
        self.majorant(t)
    }

    /// Monotone cubic interpolant of `v` over a geometric grid, built on
    /// first use and shared by all subsequent calls.
    pub fn eval_cached(&self, r: f64) -> Result<f64> {
        self.check_domain(r)?;
        let table = match self.cache.get() {
            Some(t) => t,
            None => {
                let t = Table::build(self)?;
                self.cache.get_or_init(|| t)
            }
        };
        match table.eval(r) {
            Some(v) => Ok(v),
            None => self.eval(r),
        }
    }
}

fn source_value(f: &SourceTerm, x: f64) -> Option<f64> {
    f.value(x).ok().or_else(|| f.majorant(x).ok())
}

fn integrate_split<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> f64 {
    if a < 1.0 && b > 1.0 {
        adaptive(g, a, 1.0, 0.0, 1e-14).value + dyadic(g, 1.0, b, 1e-14).value
    } else if a > 0.0 {
        dyadic(g, a, b, 1e-14).value
    } else {
        adaptive(g, a, b, 0.0, 1e-14).value
    }
}

/// `(C_f (p+eps) / (delta n (p-n+eps)))^{1/(p-1)} (1/alpha + (p-1)/eps)`.
pub fn lemma2_c0(spec: &OperatorSpec, d: Decay) -> f64 {
    let (p, n) = (spec.p, spec.n as f64);
    (d.c_f * (p + d.eps) / (spec.delta * n * (p - n + d.eps))).powf(1.0 / (p - 1.0))
        * (1.0 / spec.alpha() + (p - 1.0) / d.eps)
}

/// `(C_f / (delta (p-n+eps)))^{1/(p-1)} (p-1)/eps`.
pub fn envelope_c0(spec: &OperatorSpec, d: Decay) -> f64 {
    let (p, n) = (spec.p, spec.n as f64);
    (d.c_f / (spec.delta * (p - n + d.eps))).powf(1.0 / (p - 1.0)) * (p - 1.0) / d.eps
}

/// Dense tabulation over `r_j = anchor * q^j` with exact slopes.
#[derive(Debug)]
struct Table {
    r: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
    /// Exponent used below the first node (`v ~ r^alpha` near 0).
    alpha: f64,
}

const TABLE_RATIO: f64 = 1.01;
const TABLE_DECADES_BELOW: f64 = 6.0;
const TABLE_MAX_OUTER: f64 = 1048576.0;

impl Table {
    fn build(b: &Barrier) -> Result<Table> {
        let (lo, hi) = b.domain();
        let (start, end) = match b.family {
            Family::Lemma1 | Family::Lemma1Prime => (b.radius * 10f64.powf(-TABLE_DECADES_BELOW), b.radius),
            Family::Lemma2 => (10f64.powf(-TABLE_DECADES_BELOW), TABLE_MAX_OUTER),
            Family::Lemma2Prime => (lo, b.radius * TABLE_MAX_OUTER),
        };
        let end = end.min(hi);
        // Anchor: R for the ball families, 1 for Lemma2, R for Lemma2Prime.
        let anchor = if b.family == Family::Lemma2 { 1.0 } else { b.radius };
        let lq = TABLE_RATIO.ln();
        let j0 = ((start / anchor).ln() / lq).ceil() as i64;
        let j1 = ((end / anchor).ln() / lq).floor() as i64;
        let mut r: Vec<f64> = (j0..=j1).map(|j| anchor * (j as f64 * lq).exp()).collect();
        if r.first().map_or(true, |x| *x > start * (1.0 + 1e-12)) {
            r.insert(0, start);
        }
        if r.last().map_or(true, |x| *x < end * (1.0 - 1e-12)) {
            r.push(end);
        }
        let mut v = Vec::with_capacity(r.len());
        v.push(b.eval(r[0])?);
        let g = |t: f64| b.derivative(t);
        for i in 1..r.len() {
            let inc = adaptive(&g, r[i - 1], r[i], 0.0, 1e-14).value;
            v.push(v[i - 1] + inc);
        }
        let mut d: Vec<f64> = r.iter().map(|&t| if t > 0.0 { b.derivative(t) } else { 0.0 }).collect();
        // Fritsch–Carlson limiting keeps the Hermite interpolant monotone.
        for i in 0..r.len() - 1 {
            let h = r[i + 1] - r[i];
            let delta = (v[i + 1] - v[i]) / h;
            if delta <= 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let a = d[i] / delta;
            let c = d[i + 1] / delta;
            let s = a * a + c * c;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                d[i] = tau * a * delta;
                d[i + 1] = tau * c * delta;
            }
        }
        Ok(Table { r, v, d, alpha: b.spec.alpha() })
    }

    fn eval(&self, x: f64) -> Option<f64> {
        let first = self.r[0];
        if x < first {
            if self.r[0] == 0.0 {
                return None;
            }
            if x <= 0.0 {
                return Some(0.0);
            }
            if self.v[0] == 0.0 {
                return Some(0.0);
            }
            return Some(self.v[0] * (x / first).powf(self.alpha));
        }
        if x > *self.r.last().unwrap() {
            return None;
        }
        let i = match self.r.binary_search_by(|t| t.total_cmp(&x)) {
            Ok(i) => return Some(self.v[i]),
            Err(i) => i - 1,
        };
        let h = self.r[i + 1] - self.r[i];
        let s = (x - self.r[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(h00 * self.v[i] + h10 * h * self.d[i] + h01 * self.v[i + 1] + h11 * h * self.d[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Coefficient;
    use approx::assert_relative_eq;

    fn plap(p: f64, n: usize) -> OperatorSpec {
        OperatorSpec::plap(p, n).unwrap()
    }

    #[test]
    fn lemma1_closed_form() {
        let b = make_lemma1(&plap(3.0, 2), 10.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(b.eval(4.0).unwrap(), 4.0, max_relative = 1e-11);
        for r in [1e-4, 0.3, 2.0, 9.5] {
            assert_relative_eq!(b.eval(r).unwrap(), 2.0 * f64::sqrt(r), max_relative = 1e-11);
        }
        assert_eq!(b.eval(0.0).unwrap(), 0.0);
        assert!(b.eval(10.5).is_err());
        let z = make_lemma1(&plap(3.0, 2), 10.0, 0.0, 0.0).unwrap();
        assert_eq!(z.eval(3.0).unwrap(), 0.0);
        assert!(make_lemma1(&plap(2.0, 2), 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn lemma1_with_source_closed_form() {
        // p = 3, n = 2, A = 1: v' = sqrt((C - f t^2/2)/t).
        let (r0, fs, a) = (2.0, 0.5, 1.0);
        let b = make_lemma1(&plap(3.0, 2), r0, fs, a).unwrap();
        let c = r0 * r0 * fs / 2.0 + 1.0;
        let g = |t: f64| ((c - fs * t * t / 2.0) / t).sqrt();
        // Substitute t = s^2 to get a smooth reference integrand.
        let reference = adaptive(&|s: f64| 2.0 * s * g(s * s), 0.0, r0.sqrt(), 0.0, 1e-15).value;
        assert_relative_eq!(b.eval(r0).unwrap(), reference, max_relative = 1e-11);
        let bd = b.bounds(r0);
        let v = b.eval(r0).unwrap();
        assert!(bd.lower <= v && v <= bd.upper);
    }

    #[test]
    fn lemma2_constant() {
        let spec = plap(3.0, 2);
        let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
        let b = make_lemma2(&spec, &f, 0.0).unwrap();
        assert_relative_eq!(b.bounds(5.0).upper, 4.0, max_relative = 1e-14);
        let lim = b.limit_at_infinity().unwrap().unwrap();
        assert!(lim <= 4.0 && lim > 0.0);
        for r in [0.2, 1.0, 3.0, 100.0] {
            assert!(b.eval(r).unwrap() <= lim * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lemma2_prime_constant() {
        let spec = plap(3.0, 2);
        let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
        assert_relative_eq!(envelope_c0(&spec, f.decay.unwrap()), 2f64.sqrt(), max_relative = 1e-14);
        let b = make_lemma2_prime(&spec, 4.0, &f, 0.0).unwrap();
        assert_eq!(b.eval(4.0).unwrap(), 0.0);
        let lim = b.limit_at_infinity().unwrap().unwrap();
        // A = 1: the bound is attained in the limit.
        assert_relative_eq!(lim, 2f64.sqrt() * 0.5, max_relative = 1e-9);
        let b1 = make_lemma2_prime(&spec, 4.0, &f, 0.3).unwrap();
        assert_eq!(b1.eval(4.0).unwrap(), 0.0);
    }

    #[test]
    fn lemma2_prime_log_growth() {
        let spec = plap(2.0, 2);
        let f = SourceTerm::zero().with_decay(0.0, 1.0);
        let b = make_lemma2_prime(&spec, 2.0, &f, 1.0).unwrap();
        assert_relative_eq!(b.eval(20.0).unwrap(), (10f64).ln(), max_relative = 1e-11);
    }

    #[test]
    fn lemma1_prime_reduces() {
        let spec = plap(3.0, 2);
        let z = SourceTerm::zero();
        let b = make_lemma1_prime(&spec, 3.0, &z, 0.7).unwrap();
        let c = make_lemma1(&spec, 3.0, 0.0, 0.7).unwrap();
        assert_relative_eq!(b.eval(2.0).unwrap(), c.eval(2.0).unwrap(), max_relative = 1e-14);
        assert_eq!(b.center_radius, 6.0);
    }

    #[test]
    fn residuals() {
        let spec = plap(3.0, 2);
        let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
        let b = make_lemma2(&spec, &f, 0.5).unwrap();
        let radii: Vec<f64> = (1..=1000).map(|i| 0.01 * i as f64).collect();
        let rep = b.residual_check(&f, &radii).unwrap();
        assert!(rep.max_abs_residual <= 1e-8, "{rep:?}");
        assert!(rep.supersolution);
        let z = make_lemma1(&spec, 2.0, 0.0, 0.0).unwrap();
        let rep = z.residual_check(&SourceTerm::zero(), &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(rep.max_abs_residual, 0.0);
    }

    #[test]
    fn cached_matches_direct() {
        let spec = OperatorSpec::with_natural_bounds(3.5, 2, Coefficient::SmoothBump { lo: 1.0, hi: 2.0 }).unwrap();
        let f = SourceTerm::power_decay(0.8, 0.5, 3.5);
        let b = make_lemma2(&spec, &f, 0.4).unwrap();
        for r in [1e-3, 0.37, 1.0, 2.2, 17.0, 900.0] {
            let d = b.eval(r).unwrap();
            let c = b.eval_cached(r).unwrap();
            assert_relative_eq!(c, d, max_relative = 1e-10);
        }
    }
}

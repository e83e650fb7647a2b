//! The operator coefficient `A`, the flux map `phi(t) = t^(p-1) A(t)` and its
//! inverse, plus sampled validation of the structural conditions on `A`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{domain, precondition, Error, Result};
use crate::expr::Expr;
use crate::quadrature::gauss_legendre;
use crate::roots::solve_increasing;

/// Default relative tolerance of `phi_inverse`.
pub const PHI_INV_TOL: f64 = 1e-12;

/// Coefficient function `A` on `[0, inf)`.
#[derive(Clone)]
pub enum Coefficient {
    /// `A == c`.
    Const(f64),
    /// `A(t) = lo + (hi - lo) t^2 / (1 + t^2)`, increasing from `lo` to `hi`.
    SmoothBump { lo: f64, hi: f64 },
    /// User expression in the variable `t`.
    Expr(Expr),
    /// Arbitrary closure, labelled for reports.
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>, String),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coefficient({})", self.name())
    }
}

impl Coefficient {
    /// Resolve a catalog name: `plap`, `const:c`, `smooth-bump[:lo:hi]`,
    /// `expr:<expression in t>`, or a bare expression.
    pub fn parse(name: &str) -> Result<Coefficient> {
        let name = name.trim();
        if name == "plap" {
            return Ok(Coefficient::Const(1.0));
        }
        if let Some(c) = name.strip_prefix("const:") {
            let c: f64 = c.trim().parse().map_err(|_| Error::Parse(format!("bad constant in '{name}'")))?;
            return Ok(Coefficient::Const(c));
        }
        if name == "smooth-bump" {
            return Ok(Coefficient::SmoothBump { lo: 1.0, hi: 2.0 });
        }
        if let Some(rest) = name.strip_prefix("smooth-bump:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("expected smooth-bump:lo:hi, got '{name}'")));
            }
            let lo: f64 = parts[0].trim().parse().map_err(|_| Error::Parse(format!("bad bound in '{name}'")))?;
            let hi: f64 = parts[1].trim().parse().map_err(|_| Error::Parse(format!("bad bound in '{name}'")))?;
            return Ok(Coefficient::SmoothBump { lo, hi });
        }
        let body = name.strip_prefix("expr:").unwrap_or(name);
        Ok(Coefficient::Expr(Expr::parse(body, "t")?))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Const(c) => *c,
            Coefficient::SmoothBump { lo, hi } => {
                let t2 = t * t;
                if t2.is_infinite() {
                    *hi
                } else {
                    lo + (hi - lo) * t2 / (1.0 + t2)
                }
            }
            Coefficient::Expr(e) => e.eval(t),
            Coefficient::Func(f, _) => f(t),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Coefficient::Const(c) if *c == 1.0 => "plap".into(),
            Coefficient::Const(c) => format!("const:{c}"),
            Coefficient::SmoothBump { lo, hi } => format!("smooth-bump:{lo}:{hi}"),
            Coefficient::Expr(e) => format!("expr:{}", e.source()),
            Coefficient::Func(_, label) => label.clone(),
        }
    }

    /// Exact ellipticity window when it is known from the closed form.
    pub fn natural_bounds(&self) -> Option<(f64, f64)> {
        match self {
            Coefficient::Const(c) => Some((*c, *c)),
            Coefficient::SmoothBump { lo, hi } => Some((lo.min(*hi), lo.max(*hi))),
            _ => None,
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Coefficient::Const(c) => Some(*c),
            _ => None,
        }
    }
}

/// Exponent, dimension and coefficient of the operator, with the declared
/// bounds `delta <= A <= l_up` and optional derivative bounds on `phi`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub p: f64,
    pub n: usize,
    pub coeff: Coefficient,
    pub delta: f64,
    pub l_up: f64,
    pub delta_prime: Option<f64>,
    pub l_prime: Option<f64>,
}

impl OperatorSpec {
    pub fn new(p: f64, n: usize, coeff: Coefficient, delta: f64, l_up: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(precondition(format!("p must exceed 1, got {p}")));
        }
        if n < 2 {
            return Err(precondition(format!("n must be at least 2, got {n}")));
        }
        if !(delta > 0.0) || !(delta <= l_up) || !l_up.is_finite() {
            return Err(precondition(format!("need 0 < delta <= L, got delta={delta}, L={l_up}")));
        }
        Ok(OperatorSpec { p, n, coeff, delta, l_up, delta_prime: None, l_prime: None })
    }

    /// `A` with its natural window; errors for coefficients without one.
    pub fn with_natural_bounds(p: f64, n: usize, coeff: Coefficient) -> Result<Self> {
        let (d, l) = coeff
            .natural_bounds()
            .ok_or_else(|| precondition("coefficient has no closed-form bounds; declare delta and L"))?;
        Self::new(p, n, coeff, d, l)
    }

    /// The p-Laplacian, `A == 1`.
    pub fn plap(p: f64, n: usize) -> Result<Self> {
        Self::new(p, n, Coefficient::Const(1.0), 1.0, 1.0)
    }

    pub fn with_derivative_bounds(mut self, delta_prime: f64, l_prime: f64) -> Self {
        self.delta_prime = Some(delta_prime);
        self.l_prime = Some(l_prime);
        self
    }

    /// `(p - n) / (p - 1)`.
    pub fn alpha(&self) -> f64 {
        (self.p - self.n as f64) / (self.p - 1.0)
    }

    #[inline]
    pub(crate) fn phi_raw(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t.powf(self.p - 1.0) * self.coeff.eval(t)
    }

    /// `phi(t) = t^(p-1) A(t)`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("phi requires t >= 0, got {t}")));
        }
        Ok(self.phi_raw(t))
    }

    /// Odd extension `sgn(t) phi(|t|)`.
    pub fn phi_signed(&self, t: f64) -> f64 {
        let v = self.phi_raw(t.abs());
        if t < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `phi^{-1}(s)` by bracketed root finding inside
    /// `[(s/L)^(1/(p-1)), (s/delta)^(1/(p-1))]`.
    pub fn phi_inverse(&self, s: f64, tol: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(domain(format!("phi_inverse requires s >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let e = 1.0 / (self.p - 1.0);
        if let Some(c) = self.coeff.constant() {
            return Ok((s / c).powf(e));
        }
        let lo = (s / self.l_up).powf(e);
        let hi = (s / self.delta).powf(e);
        if lo == hi {
            return Ok(lo);
        }
        if s.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let t = solve_increasing(|t| self.phi_raw(t), s, lo, hi, tol)?;
        Ok(t.clamp(lo, hi))
    }

    /// Odd extension of the inverse; `NaN`-free for finite input.
    pub fn phi_inverse_signed(&self, s: f64) -> Result<f64> {
        let t = self.phi_inverse(s.abs(), PHI_INV_TOL)?;
        Ok(if s < 0.0 { -t } else { t })
    }

    /// Derivative of `phi`; closed form for constant `A`, otherwise a
    /// central difference on `A`.
    pub fn dphi(&self, t: f64) -> f64 {
        let t = t.abs();
        let pm = self.p - 1.0;
        if let Some(c) = self.coeff.constant() {
            return pm * c * t.powf(self.p - 2.0);
        }
        let h = 1e-6 * t.max(1e-6);
        let lo = (t - h).max(0.0);
        let da = (self.coeff.eval(t + h) - self.coeff.eval(lo)) / (t + h - lo);
        pm * t.powf(self.p - 2.0) * self.coeff.eval(t) + t.powf(pm) * da
    }

    /// `Phi(s) = int_0^s phi(t) dt`.
    pub fn big_phi(&self, s: f64) -> f64 {
        let s = s.abs();
        if s == 0.0 {
            return 0.0;
        }
        if let Some(c) = self.coeff.constant() {
            return c * s.powf(self.p) / self.p;
        }
        let (x, w) = gl8();
        // Dyadic panels toward 0; the neglected piece is below L (s 2^-K)^p / p.
        let panels = (57.0 / self.p).ceil() as i32 + 3;
        let mut total = 0.0;
        for k in (0..panels).rev() {
            let hi = s * 0.5f64.powi(k);
            let lo = 0.5 * hi;
            let c = 0.5 * (hi + lo);
            let h = 0.5 * (hi - lo);
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(w) {
                acc += wi * self.phi_raw(c + h * xi);
            }
            total += acc * h;
        }
        total
    }

    /// Sampled check of both condition sets on `A`.
    pub fn validate_conditions(&self, sample_count: usize) -> ConditionReport {
        validate(self, sample_count.max(2))
    }
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre(8))
}

/// Outcome of one sampled sub-condition.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionEntry {
    /// `"C1"` for the differentiable condition set, `"C0"` for the continuous one.
    pub set: &'static str,
    /// Roman item label within the set.
    pub item: &'static str,
    pub description: &'static str,
    /// `None` when the data needed for the check were not declared.
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionReport {
    pub samples: usize,
    pub t_max: f64,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn entry(&self, set: &str, item: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.set == set && e.item == item)
    }

    /// True when no evaluated entry failed.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.passed != Some(false))
    }
}

/// `0` followed by a geometric grid on `[1e-6, 1e6]`.
pub fn condition_grid(sample_count: usize) -> Vec<f64> {
    let m = sample_count.max(2);
    let mut g = Vec::with_capacity(m + 1);
    g.push(0.0);
    let (a, b) = (1e-6f64.ln(), 1e6f64.ln());
    for i in 0..m {
        g.push((a + (b - a) * i as f64 / (m - 1) as f64).exp());
    }
    g
}

fn validate(spec: &OperatorSpec, samples: usize) -> ConditionReport {
    let grid = condition_grid(samples);
    let a: Vec<f64> = grid.iter().map(|&t| spec.coeff.eval(t)).collect();
    let finite = a.iter().all(|v| v.is_finite());

    let fd = |t: f64| {
        let h = 1e-6 * t.max(1e-3);
        if t == 0.0 {
            (spec.coeff.eval(h) - spec.coeff.eval(0.0)) / h
        } else {
            (spec.coeff.eval(t + h) - spec.coeff.eval((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
        }
    };
    let smooth = finite && grid.iter().all(|&t| fd(t).is_finite());

    let slack = 1e-12;
    let mut worst_bound = None;
    for (&t, &v) in grid.iter().zip(&a) {
        if v < spec.delta * (1.0 - slack) || v > spec.l_up * (1.0 + slack) {
            worst_bound = Some((t, v));
            break;
        }
    }
    let bounds_ok = finite && worst_bound.is_none();
    let bounds_detail = match worst_bound {
        Some((t, v)) => format!("A({t:e}) = {v} outside [{}, {}]", spec.delta, spec.l_up),
        None => format!("{} <= A <= {} on all samples", spec.delta, spec.l_up),
    };

    let phis: Vec<f64> = grid.iter().map(|&t| spec.phi_raw(t)).collect();
    let mut mono_fail = None;
    for i in 1..grid.len() {
        if !(phis[i] > phis[i - 1]) {
            mono_fail = Some(grid[i]);
            break;
        }
    }
    let mono_detail = match mono_fail {
        Some(t) => format!("phi fails to increase at t = {t:e}"),
        None => "phi strictly increasing on samples".into(),
    };

    let (deriv_passed, deriv_detail) = match (spec.delta_prime, spec.l_prime) {
        (Some(dp), Some(lp)) => {
            let mut fail = None;
            for &t in grid.iter().skip(1) {
                let h = 1e-5 * t;
                let d = (spec.phi_raw(t + h) - spec.phi_raw(t - h)) / (2.0 * h);
                let w = t.powf(spec.p - 2.0);
                let tol = 1e-6 * d.abs();
                if d < dp * w - tol || d > lp * w + tol {
                    fail = Some((t, d / w));
                    break;
                }
            }
            match fail {
                Some((t, r)) => (Some(false), format!("phi'(t)/t^(p-2) = {r} at t = {t:e}")),
                None => (Some(true), format!("{dp} t^(p-2) <= phi' <= {lp} t^(p-2) on samples")),
            }
        }
        _ => (None, "derivative bounds not declared".into()),
    };

    let entries = vec![
        ConditionEntry {
            set: "C1",
            item: "i",
            description: "A continuously differentiable (finite values and difference quotients)",
            passed: Some(smooth),
            detail: if smooth { "finite".into() } else { "non-finite value or derivative".into() },
        },
        ConditionEntry {
            set: "C1",
            item: "ii",
            description: "delta <= A(t) <= L",
            passed: Some(bounds_ok),
            detail: bounds_detail.clone(),
        },
        ConditionEntry {
            set: "C1",
            item: "iii",
            description: "delta' t^(p-2) <= phi'(t) <= L' t^(p-2)",
            passed: deriv_passed,
            detail: deriv_detail,
        },
        ConditionEntry {
            set: "C0",
            item: "i",
            description: "A continuous and finite, defined at t = 0",
            passed: Some(finite),
            detail: if finite { "finite".into() } else { "non-finite value".into() },
        },
        ConditionEntry {
            set: "C0",
            item: "ii",
            description: "delta <= A(t) <= L",
            passed: Some(bounds_ok),
            detail: bounds_detail,
        },
        ConditionEntry {
            set: "C0",
            item: "iii",
            description: "t^(p-1) A(t) strictly increasing",
            passed: Some(mono_fail.is_none()),
            detail: mono_detail,
        },
    ];
    ConditionReport { samples, t_max: *grid.last().unwrap(), entries }
}

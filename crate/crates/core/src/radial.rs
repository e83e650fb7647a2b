//! Radially symmetric solutions from the integrated first-order form
//! `phi(|u'|) sgn(u') r^(n-1) = C - int_{R_in}^r f s^(n-1) ds`.

use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::operator::OperatorSpec;
use crate::quadrature::{adaptive, gauss_legendre, to_infinity_log};
use crate::roots::solve_increasing_tol;
use crate::source::SourceTerm;

#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    /// Geometric panels on `[R_in, R_out]`.
    pub panels: usize,
    /// Gauss–Legendre points per panel.
    pub gauss_points: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions { panels: 1024, gauss_points: 8 }
    }
}

// Fixed composite rule with the source moment `S(t) = int f s^(n-1)`
// precomputed at every node.
#[derive(Debug, Clone)]
struct Panels {
    bounds: Vec<f64>,
    /// `S` at panel boundaries.
    s_bound: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    s_nodes: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
    // Sub-panel rule used for S inside a panel.
    gl_fine: (Vec<f64>, Vec<f64>),
}

fn radial_weight(f: &SourceTerm, n: usize) -> impl Fn(f64) -> f64 + '_ {
    move |s: f64| f.value(s).unwrap_or(f64::NAN) * s.powi(n as i32 - 1)
}

fn gl_on<F: Fn(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), g: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        acc += w * g(c + h * x);
    }
    acc * h
}

impl Panels {
    fn build(f: &SourceTerm, n: usize, r_in: f64, r_out: f64, opts: RadialOptions, breaks: &[f64]) -> Panels {
        let m = opts.panels.max(1);
        let q = (r_out / r_in).ln() / m as f64;
        let mut bounds: Vec<f64> = (0..=m).map(|k| r_in * (q * k as f64).exp()).collect();
        bounds[m] = r_out;
        for &b in breaks {
            if b > r_in && b < r_out && !bounds.iter().any(|x| (x - b).abs() <= 1e-13 * b) {
                bounds.push(b);
            }
        }
        bounds.sort_by(f64::total_cmp);
        let gl = gauss_legendre(opts.gauss_points.max(1));
        let gl_fine = gauss_legendre(16);
        let w = radial_weight(f, n);
        let mut s_bound = vec![0.0; bounds.len()];
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut s_nodes = Vec::new();
        for k in 0..bounds.len() - 1 {
            let (a, b) = (bounds[k], bounds[k + 1]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in gl.0.iter().zip(&gl.1) {
                let t = c + h * x;
                nodes.push(t);
                weights.push(wt * h);
                s_nodes.push(s_bound[k] + gl_on(&gl_fine, &w, a, t));
            }
            s_bound[k + 1] = s_bound[k] + gl_on(&gl_fine, &w, a, b);
        }
        Panels { bounds, s_bound, nodes, weights, s_nodes, gl, gl_fine }
    }

    fn panel_of(&self, r: f64) -> usize {
        match self.bounds.binary_search_by(|t| t.total_cmp(&r)) {
            Ok(i) => i.min(self.bounds.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.bounds.len() - 2),
        }
    }

    fn moment<F: Fn(f64) -> f64>(&self, w: &F, r: f64) -> f64 {
        let k = self.panel_of(r);
        self.s_bound[k] + gl_on(&self.gl_fine, w, self.bounds[k], r)
    }
}

/// Radial solution of the Dirichlet problem on `[R_in, R_out]`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub spec: OperatorSpec,
    pub source: SourceTerm,
    pub r_in: f64,
    pub r_out: f64,
    pub u_in: f64,
    pub u_out: f64,
    pub c_flux: f64,
    panels: Panels,
    u_bound: Vec<f64>,
}

fn slope(spec: &OperatorSpec, flux: f64, t: f64) -> f64 {
    spec.phi_inverse_signed(flux / t.powi(spec.n as i32 - 1)).unwrap_or(f64::NAN)
}

/// Shoots on the flux constant `C` so that `u(R_out) = u_out`.
pub fn solve_radial_bvp(
    spec: &OperatorSpec,
    f: &SourceTerm,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    tol: f64,
) -> Result<RadialSolution> {
    solve_radial_bvp_with(spec, f, r_in, r_out, u_in, u_out, tol, RadialOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_radial_bvp_with(
    spec: &OperatorSpec,
    f: &SourceTerm,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    tol: f64,
    opts: RadialOptions,
) -> Result<RadialSolution> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(precondition(format!("need 0 < R_in < R_out, got [{r_in}, {r_out}]")));
    }
    f.value(r_in)?;
    let panels = Panels::build(f, spec.n, r_in, r_out, opts, &[f.r_min]);
    if panels.s_nodes.iter().any(|s| !s.is_finite()) {
        return Err(precondition("source moment is not finite on the interval"));
    }
    let rise = |c: f64| -> f64 {
        let mut acc = 0.0;
        for ((t, w), s) in panels.nodes.iter().zip(&panels.weights).zip(&panels.s_nodes) {
            acc += w * slope(spec, c - s, *t);
        }
        acc
    };
    let target = u_out - u_in;
    // Initial scale from the phi bounds: a linear profile needs
    // phi(|slope|) r^(n-1) <= L |slope|^(p-1) R_out^(n-1).
    let smax = panels.s_nodes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mean = (target / (r_out - r_in)).abs();
    let mut scale = smax + spec.l_up * mean.powf(spec.p - 1.0) * r_out.powi(spec.n as i32 - 1);
    if scale == 0.0 {
        scale = 1.0;
    }
    let g0 = rise(0.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    if g0 < target {
        hi = scale;
        while rise(hi) < target {
            lo = hi;
            hi *= 4.0;
            if !hi.is_finite() {
                return Err(Error::NonConvergence("shooting bracket expansion overflowed".into()));
            }
        }
    } else if g0 > target {
        lo = -scale;
        while rise(lo) > target {
            hi = lo;
            lo *= 4.0;
            if !lo.is_finite() {
                return Err(Error::NonConvergence("shooting bracket expansion overflowed".into()));
            }
        }
    }
    let u_scale = target.abs().max(u_in.abs()).max(u_out.abs()).max(1.0);
    let ftol = tol * u_scale * 1e-2;
    let c = if lo == hi { lo } else { solve_increasing_tol(rise, target, lo, hi, ftol, 1e-15, 1e-300)? };
    let mut u_bound = vec![u_in; panels.bounds.len()];
    let g = panels.gl.0.len();
    for k in 0..panels.bounds.len() - 1 {
        let mut acc = 0.0;
        for j in 0..g {
            let i = k * g + j;
            acc += panels.weights[i] * slope(spec, c - panels.s_nodes[i], panels.nodes[i]);
        }
        u_bound[k + 1] = u_bound[k] + acc;
    }
    let reached = *u_bound.last().unwrap();
    if (reached - u_out).abs() > tol * u_scale {
        return Err(Error::NonConvergence(format!("shooting reached u(R_out) = {reached}, wanted {u_out}")));
    }
    Ok(RadialSolution {
        spec: spec.clone(),
        source: f.clone(),
        r_in,
        r_out,
        u_in,
        u_out,
        c_flux: c,
        panels,
        u_bound,
    })
}

/// Worst deviation from the integrated identity, used by [`flux_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxResidual {
    pub max_abs: f64,
    pub worst_radius: f64,
}

impl RadialSolution {
    /// `S(r) = int_{R_in}^r f s^(n-1) ds` from the precomputed table.
    pub fn moment(&self, r: f64) -> f64 {
        let w = radial_weight(&self.source, self.spec.n);
        self.panels.moment(&w, r.clamp(self.r_in, self.r_out))
    }

    /// `phi(|u'|) sgn(u') r^(n-1)`.
    pub fn flux(&self, r: f64) -> f64 {
        self.c_flux - self.moment(r)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.clamp(self.r_in, self.r_out);
        slope(&self.spec, self.flux(r), r)
    }

    pub fn value(&self, r: f64) -> f64 {
        let r = r.clamp(self.r_in, self.r_out);
        let k = self.panels.panel_of(r);
        let a = self.panels.bounds[k];
        if r == a {
            return self.u_bound[k];
        }
        if r == self.panels.bounds[k + 1] {
            return self.u_bound[k + 1];
        }
        let w = radial_weight(&self.source, self.spec.n);
        let sa = self.panels.s_bound[k];
        let gl = &self.panels.gl_fine;
        let du = gl_on(gl, &|t: f64| slope(&self.spec, self.c_flux - sa - gl_on(gl, &w, a, t), t), a, r);
        self.u_bound[k] + du
    }

    /// Panel boundaries of the underlying quadrature grid.
    pub fn grid(&self) -> &[f64] {
        &self.panels.bounds
    }
}

/// Checks `phi(u') r^(n-1) = C - int f s^(n-1)` at the given radii, with
/// `u'` from fourth-order finite differences of the value function and the
/// source integral from an independent adaptive quadrature.
pub fn flux_residual(sol: &RadialSolution, radii: &[f64]) -> FluxResidual {
    let n = sol.spec.n as i32;
    let w = radial_weight(&sol.source, sol.spec.n);
    let mut worst = FluxResidual { max_abs: 0.0, worst_radius: f64::NAN };
    for &r in radii {
        let r = r.clamp(sol.r_in, sol.r_out);
        let h = 1e-3 * r.min(sol.r_out - sol.r_in);
        let u = |x: f64| sol.value(x);
        let du = if r - 2.0 * h >= sol.r_in && r + 2.0 * h <= sol.r_out {
            // Differences first, so constants give exactly zero.
            (8.0 * (u(r + h) - u(r - h)) - (u(r + 2.0 * h) - u(r - 2.0 * h))) / (12.0 * h)
        } else {
            let s = if r - 2.0 * h < sol.r_in { 1.0 } else { -1.0 };
            let hs = s * h;
            let u0 = u(r);
            let d = |k: f64| u(r + k * hs) - u0;
            (48.0 * d(1.0) - 36.0 * d(2.0) + 16.0 * d(3.0) - 3.0 * d(4.0)) / (12.0 * hs)
        };
        let moment = if r > sol.r_in {
            let mut acc = 0.0;
            let mut lo = sol.r_in;
            for b in [sol.source.r_min, r] {
                if b > lo && b <= r {
                    acc += adaptive(&w, lo, b, 0.0, 1e-14).value;
                    lo = b;
                }
            }
            acc
        } else {
            0.0
        };
        let dev = (sol.spec.phi_signed(du) * r.powi(n - 1) - (sol.c_flux - moment)).abs();
        if dev > worst.max_abs || worst.worst_radius.is_nan() {
            worst = FluxResidual { max_abs: dev, worst_radius: r };
        }
    }
    worst
}

/// Bounded radial solution on `[R_in, inf)` with vanishing flux at infinity,
/// `u' = psi(T(t) / t^(n-1))`, `T(t) = int_t^inf f s^(n-1) ds`.
#[derive(Debug, Clone)]
pub struct ExteriorRadialSolution {
    pub spec: OperatorSpec,
    pub r_in: f64,
    pub u_in: f64,
    /// `lim_{r -> inf} u(r)`.
    pub limit: f64,
    source: SourceTerm,
    radii: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// `T` at the table nodes.
    tails: Vec<f64>,
}

const EXT_STEPS_PER_DOUBLING: usize = 8;
const EXT_DOUBLINGS: usize = 64;

pub fn solve_exterior_radial(spec: &OperatorSpec, f: &SourceTerm, r_in: f64, u_in: f64) -> Result<ExteriorRadialSolution> {
    if !(r_in > 0.0) {
        return Err(precondition("need R_in > 0"));
    }
    if spec.p < spec.n as f64 {
        return Err(precondition("bounded exterior radial solutions need p >= n"));
    }
    let w = radial_weight(f, spec.n);
    let count = EXT_STEPS_PER_DOUBLING * EXT_DOUBLINGS;
    let q = std::f64::consts::LN_2 / EXT_STEPS_PER_DOUBLING as f64;
    let radii: Vec<f64> = (0..=count).map(|k| r_in * (q * k as f64).exp()).collect();
    let last = *radii.last().unwrap();
    let tail_t = if f.is_zero() {
        0.0
    } else {
        to_infinity_log(&|x: f64| {
            let s = x.exp();
            w(s) * s
        }, last.ln(), 1e-13)?
        .value
    };
    let gl = gauss_legendre(16);
    // T at table nodes, accumulated inward.
    let mut t_nodes = vec![tail_t; radii.len()];
    for k in (0..count).rev() {
        let (a, b) = (radii[k], radii[k + 1]);
        let mut acc = 0.0;
        if f.r_min > a && f.r_min < b {
            acc += gl_on(&gl, &w, f.r_min, b);
        } else {
            acc += gl_on(&gl, &w, a, b);
        }
        t_nodes[k] = t_nodes[k + 1] + acc;
    }
    let du = |t: f64, k: usize| -> f64 {
        let tt = t_nodes[k + 1] + gl_on(&gl, &w, t, radii[k + 1]);
        slope(spec, tt, t)
    };
    let mut values = vec![u_in; radii.len()];
    for k in 0..count {
        let inc = gl_on(&gl, &|t| du(t, k), radii[k], radii[k + 1]);
        values[k + 1] = values[k] + inc;
    }
    let derivs: Vec<f64> = radii.iter().zip(&t_nodes).map(|(r, t)| slope(spec, *t, *r)).collect();
    // Remaining rise beyond the table: u' ~ c t^(-1-beta).
    let rest = if f.is_zero() {
        0.0
    } else {
        to_infinity_log(&|x: f64| {
            let s = x.exp();
            let tt = adaptive(&w, s, 2.0 * s, 0.0, 1e-12).value
                + to_infinity_log(&|y: f64| {
                    let z = y.exp();
                    w(z) * z
                }, (2.0 * s).ln(), 1e-10)
                .map(|q| q.value)
                .unwrap_or(0.0);
            slope(spec, tt, s) * s
        }, last.ln(), 1e-10)?
        .value
    };
    Ok(ExteriorRadialSolution {
        spec: spec.clone(),
        r_in,
        u_in,
        limit: values[count] + rest,
        source: f.clone(),
        radii,
        values,
        derivs,
        tails: t_nodes,
    })
}

impl ExteriorRadialSolution {
    /// `u(r)`: table value plus a Gauss–Legendre step inside the cell;
    /// beyond the table the limit is approached along the last slope's power tail.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.max(self.r_in);
        let last = *self.radii.last().unwrap();
        if r >= last {
            let gap = self.limit - *self.values.last().unwrap();
            return self.limit - gap * (last / r).powf(self.tail_beta());
        }
        let i = match self.radii.binary_search_by(|t| t.total_cmp(&r)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        self.values[i] + gl_on(&gauss_legendre(16), &|t| self.derivative(t), self.radii[i], r)
    }

    /// `u'(r) = psi(T(r) / r^(n-1))`.
    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.max(self.r_in);
        let k = match self.radii.binary_search_by(|t| t.total_cmp(&r)) {
            Ok(i) => return self.derivs[i],
            Err(i) => i,
        };
        if k >= self.radii.len() {
            let last = *self.radii.last().unwrap();
            return *self.derivs.last().unwrap() * (last / r).powf(1.0 + self.tail_beta());
        }
        let w = radial_weight(&self.source, self.spec.n);
        let tt = self.tails[k] + gl_on(&gauss_legendre(16), &w, r, self.radii[k]);
        slope(&self.spec, tt, r)
    }

    fn tail_beta(&self) -> f64 {
        let last = *self.radii.last().unwrap();
        let gap = self.limit - *self.values.last().unwrap();
        if gap > 0.0 {
            (*self.derivs.last().unwrap() * last / gap).max(1e-12)
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::make_lemma2_prime;
    use approx::assert_relative_eq;

    #[test]
    fn p_harmonic_closed_form() {
        let spec = OperatorSpec::plap(3.0, 2).unwrap();
        let sol = solve_radial_bvp(&spec, &SourceTerm::zero(), 1.0, 4.0, 0.0, 2.0, 1e-12).unwrap();
        for r in [1.0, 1.3, 2.0, 3.7, 4.0] {
            assert_relative_eq!(sol.value(r), 2.0 * (r.sqrt() - 1.0), epsilon = 1e-12);
        }
        assert_relative_eq!(sol.c_flux, 1.0, max_relative = 1e-11);
        let radii: Vec<f64> = (0..50).map(|i| 1.0 + 3.0 * i as f64 / 49.0).collect();
        assert!(flux_residual(&sol, &radii).max_abs <= 1e-9);
    }

    #[test]
    fn constants() {
        let spec = OperatorSpec::plap(2.5, 3).unwrap();
        let sol = solve_radial_bvp(&spec, &SourceTerm::zero(), 1.0, 5.0, 0.7, 0.7, 1e-12).unwrap();
        assert_eq!(sol.c_flux, 0.0);
        assert_eq!(sol.value(3.0), 0.7);
        assert_eq!(flux_residual(&sol, &[1.0, 2.0, 5.0]).max_abs, 0.0);
    }

    #[test]
    fn reproduces_lemma2_prime() {
        let spec = OperatorSpec::plap(3.0, 2).unwrap();
        let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
        let b = make_lemma2_prime(&spec, 2.0, &f, 0.5).unwrap();
        let v10 = b.eval(10.0).unwrap();
        let sol = solve_radial_bvp(&spec, &f, 2.0, 10.0, 0.0, v10, 1e-12).unwrap();
        for r in [2.5, 5.0, 8.0] {
            assert_relative_eq!(sol.value(r), b.eval(r).unwrap(), max_relative = 1e-9);
        }
        assert_relative_eq!(sol.c_flux, b.c_integration, max_relative = 1e-9);
    }

    #[test]
    fn signed_slopes() {
        // Source strong enough that u' changes sign.
        let spec = OperatorSpec::plap(2.0, 2).unwrap();
        let f = SourceTerm::constant(8.0);
        let sol = solve_radial_bvp(&spec, &f, 1.0, 2.0, 0.0, 0.0, 1e-12).unwrap();
        assert!(sol.derivative(1.0) > 0.0 && sol.derivative(2.0) < 0.0);
        // Closed form for p = 2: u = -2 r^2 + c1 ln r + c0.
        let c1 = 6.0 / 2f64.ln();
        for r in [1.2, 1.5, 1.9] {
            assert_relative_eq!(sol.value(r), -2.0 * r * r + c1 * r.ln() + 2.0, epsilon = 1e-11);
        }
        assert!(flux_residual(&sol, &[1.0, 1.1, 1.5, 2.0]).max_abs < 1e-9);
    }

    #[test]
    fn exterior_limit() {
        // p = n = 2: u' = T/t with T = int_t^inf s^-3 s ds = 1/t, so u = u_in + 1 - 1/r.
        let spec = OperatorSpec::plap(2.0, 2).unwrap();
        let f = SourceTerm::power_decay(1.0, 1.0, 2.0);
        let sol = solve_exterior_radial(&spec, &f, 1.0, 0.0).unwrap();
        assert_relative_eq!(sol.limit, 1.0, max_relative = 1e-9);
        for r in [1.5, 10.0, 1e3, 1e30] {
            assert_relative_eq!(sol.value(r), 1.0 - 1.0 / r, epsilon = 1e-10);
        }
    }
}

//! Discrete Dirichlet solver on annuli by minimizing
//! `J(u) = int Phi(|Du|) - f u dx` over P1 elements, the exhaustion driver,
//! and Hölder seminorm estimates.
//!
//! Radial meshes use 2-node elements with exact shell weights. Polar meshes
//! split each `(r, theta)` cell into two triangles, with `|Du|^2 = u_r^2 + u_theta^2 / r^2`
//! taken at the triangle's centroid radius. For radial data both reduce to
//! the same 1D scheme.

use std::sync::Arc;

use serde::Serialize;

use crate::banded::BandedSpd;
use crate::barrier::lemma2_c0;
use crate::error::{precondition, Error, Result};
use crate::mesh::{AnnularMesh, BoundaryData, GridFunction};
use crate::operator::OperatorSpec;
use crate::quadrature::gauss_legendre;
use crate::source::{SourceKind, SourceTerm};

/// Gradients below this are lifted before dividing by `|Du|`.
const GRAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Newton-type descent with Armijo backtracking.
    Descent,
    /// Frozen-coefficient (Kačanov) iteration with energy-safeguarded damping.
    DampedPicard,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.trim() {
            "descent" => Ok(Method::Descent),
            "damped_picard" | "damped-picard" | "picard" => Ok(Method::DampedPicard),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: Method,
    /// Relative gradient tolerance; see [`EnergyReport::gradient_norm`].
    pub tol: f64,
    pub max_iter: usize,
    /// Starting iterate; boundary entries are overwritten by the data.
    pub initial: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn new(method: Method, tol: f64) -> Self {
        SolveOptions { method, tol, max_iter: 500, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub energy: f64,
    /// `max_i |dJ/du_i|` over free nodes, divided by the largest per-node
    /// magnitude of the terms that make up the gradient.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    /// Energy after each accepted step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Elem {
    nodes: [usize; 3],
    len: usize,
    rows: usize,
    b: [[f64; 3]; 2],
    w: f64,
}

impl Elem {
    fn grad(&self, u: &[f64]) -> [f64; 2] {
        let mut q = [0.0; 2];
        for (r, qr) in q.iter_mut().enumerate().take(self.rows) {
            for k in 0..self.len {
                *qr += self.b[r][k] * u[self.nodes[k]];
            }
        }
        q
    }
}

fn elements(mesh: &AnnularMesh) -> Vec<Elem> {
    let m = mesh.rings() - 1;
    let mut out = Vec::new();
    if !mesh.is_polar() {
        for i in 0..m {
            let (r0, r1) = (mesh.radii[i], mesh.radii[i + 1]);
            let h = r1 - r0;
            out.push(Elem {
                nodes: [i, i + 1, 0],
                len: 2,
                rows: 1,
                b: [[-1.0 / h, 1.0 / h, 0.0], [0.0; 3]],
                w: mesh.shell_measure(r0, r1),
            });
        }
        return out;
    }
    let t = mesh.angles;
    let dt = mesh.d_theta();
    for i in 0..m {
        let (r0, r1) = (mesh.radii[i], mesh.radii[i + 1]);
        let h = r1 - r0;
        for j in 0..t {
            let jn = (j + 1) % t;
            let a = mesh.index(i, j);
            let b = mesh.index(i + 1, j);
            let c = mesh.index(i + 1, jn);
            let d = mesh.index(i, jn);
            // (A, B, C): u_r = (B - A)/h, u_theta = (C - B)/dt.
            let rc = (r0 + 2.0 * r1) / 3.0;
            out.push(Elem {
                nodes: [a, b, c],
                len: 3,
                rows: 2,
                b: [[-1.0 / h, 1.0 / h, 0.0], [0.0, -1.0 / (dt * rc), 1.0 / (dt * rc)]],
                w: 0.5 * h * dt * rc,
            });
            // (A, C, D): u_r = (C - D)/h, u_theta = (D - A)/dt.
            let rc = (2.0 * r0 + r1) / 3.0;
            out.push(Elem {
                nodes: [a, c, d],
                len: 3,
                rows: 2,
                b: [[0.0, 1.0 / h, -1.0 / h], [-1.0 / (dt * rc), 0.0, 1.0 / (dt * rc)]],
                w: 0.5 * h * dt * rc,
            });
        }
    }
    out
}

/// Load-vector factors: `b_i = int f hat_i dx`, or for products
/// `h2(u_i) int h1 hat_i dx`.
fn radial_loads(mesh: &AnnularMesh, profile: &dyn Fn(f64) -> f64, r_min: f64) -> Vec<f64> {
    let (x, w) = gauss_legendre(8);
    let n = mesh.n as i32;
    let a = mesh.angular_factor();
    let mut ring = vec![0.0; mesh.rings()];
    for i in 0..mesh.rings() - 1 {
        let (r0, r1) = (mesh.radii[i], mesh.radii[i + 1]);
        let mut pieces = vec![(r0, r1)];
        if r_min > r0 && r_min < r1 {
            pieces = vec![(r0, r_min), (r_min, r1)];
        }
        for (lo, hi) in pieces {
            if hi <= r_min {
                continue;
            }
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (xi, wi) in x.iter().zip(&w) {
                let r = c + h * xi;
                let s = (r - r0) / (r1 - r0);
                let m = wi * h * r.powi(n - 1) * profile(r);
                ring[i] += m * (1.0 - s);
                ring[i + 1] += m * s;
            }
        }
    }
    let t = mesh.ring_size();
    let mut out = Vec::with_capacity(mesh.node_count());
    for v in ring {
        for _ in 0..t {
            out.push(a * v);
        }
    }
    out
}

enum Loads {
    Fixed(Vec<f64>),
    /// `h1` moments and `h2`, evaluated at the current iterate.
    Product(Vec<f64>, Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

fn loads(mesh: &AnnularMesh, f: &SourceTerm) -> Result<Loads> {
    match &f.kind {
        SourceKind::Radial(p) => {
            if p.is_zero() {
                return Ok(Loads::Fixed(vec![0.0; mesh.node_count()]));
            }
            let r_min = f.r_min;
            Ok(Loads::Fixed(radial_loads(mesh, &|r| p.eval(r), r_min)))
        }
        SourceKind::Grid(v) => {
            if v.len() != mesh.node_count() {
                return Err(precondition(format!("grid source has {} values, mesh has {} nodes", v.len(), mesh.node_count())));
            }
            let m = mesh.node_measures();
            Ok(Loads::Fixed(v.iter().zip(&m).map(|(a, b)| a * b).collect()))
        }
        SourceKind::Composed { h1, h2, .. } => {
            Ok(Loads::Product(radial_loads(mesh, &|r| h1.eval(r), f.r_min), h2.clone()))
        }
    }
}

/// Load vector `b` for the given iterate.
pub fn load_vector(u: &GridFunction, f: &SourceTerm) -> Result<Vec<f64>> {
    Ok(match loads(&u.mesh, f)? {
        Loads::Fixed(b) => b,
        Loads::Product(m, h2) => m.iter().zip(&u.values).map(|(a, v)| a * h2(*v)).collect(),
    })
}

// Compensated sum.
fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn norm2(q: [f64; 2]) -> f64 {
    q[0].hypot(q[1])
}

struct Problem<'a> {
    spec: &'a OperatorSpec,
    elems: Vec<Elem>,
    b: Vec<f64>,
    /// Number of Dirichlet nodes at each end (one ring).
    ring: usize,
    nodes: usize,
    bw: usize,
}

impl Problem<'_> {
    fn is_free(&self, k: usize) -> bool {
        k >= self.ring && k < self.nodes - self.ring
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let el = self.elems.iter().map(|e| e.w * self.spec.big_phi(norm2(e.grad(u))));
        let ld = self.b.iter().zip(u).map(|(b, u)| -b * u);
        neumaier(el.chain(ld))
    }

    /// Gradient and the per-node scale used in the stopping rule.
    fn gradient(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut g: Vec<f64> = self.b.iter().map(|b| -b).collect();
        let mut scale: Vec<f64> = self.b.iter().map(|b| b.abs()).collect();
        for e in &self.elems {
            let q = e.grad(u);
            let s = norm2(q);
            if s == 0.0 {
                continue;
            }
            let a = self.spec.phi_raw(s) / s;
            for k in 0..e.len {
                let mut c = 0.0;
                for r in 0..e.rows {
                    c += e.b[r][k] * q[r];
                }
                let v = e.w * a * c;
                g[e.nodes[k]] += v;
                scale[e.nodes[k]] += v.abs();
            }
        }
        let smax = (0..self.nodes).filter(|k| self.is_free(*k)).fold(0.0f64, |m, k| m.max(scale[k]));
        (g, smax)
    }

    fn grad_norm(&self, g: &[f64]) -> f64 {
        (0..self.nodes).filter(|k| self.is_free(*k)).fold(0.0f64, |m, k| m.max(g[k].abs()))
    }

    /// Assembles the free-node matrix: Newton-type when `newton`, else the
    /// frozen secant coefficient `phi(s)/s`.
    fn matrix(&self, u: &[f64], newton: bool, rel_residual: f64) -> BandedSpd {
        let nf = self.nodes - 2 * self.ring;
        let mut coeffs = Vec::with_capacity(self.elems.len());
        let mut cmax = 0.0f64;
        // The model (not the energy) lifts small gradients by a share of the
        // largest one that fades with the residual; otherwise |q|^(p-2)
        // pins or frees near-flat elements and the steps stall.
        let smax = self.elems.iter().fold(0.0f64, |m, e| m.max(norm2(e.grad(u))));
        let lift = (smax * rel_residual.min(0.1)).max(GRAD_FLOOR);
        for e in &self.elems {
            let q = e.grad(u);
            let s = norm2(q).max(lift);
            let a = self.spec.phi_raw(s) / s;
            let d = if newton { self.spec.dphi(s) } else { a };
            cmax = cmax.max(a).max(d);
            coeffs.push((q, s, a, d));
        }
        if !(cmax > 0.0) || !cmax.is_finite() {
            cmax = 1.0;
        }
        let floor = 1e-10 * cmax;
        let mut h = BandedSpd::zeros(nf, self.bw);
        for (e, &(q, s, a, d)) in self.elems.iter().zip(&coeffs) {
            let a = a.max(floor);
            let d = d.max(floor);
            // M = a I + (d - a) qhat qhat^T.
            let qh = [q[0] / s, q[1] / s];
            let mut m = [[0.0; 2]; 2];
            for r in 0..e.rows {
                for c in 0..e.rows {
                    let id = if r == c { a } else { 0.0 };
                    m[r][c] = id + (d - a) * qh[r] * qh[c];
                }
            }
            if e.rows == 1 {
                m[0][0] = d;
            }
            for k in 0..e.len {
                let gk = e.nodes[k];
                if !self.is_free(gk) {
                    continue;
                }
                for l in 0..e.len {
                    let gl = e.nodes[l];
                    if !self.is_free(gl) || gl > gk {
                        continue;
                    }
                    let mut v = 0.0;
                    for r in 0..e.rows {
                        for c in 0..e.rows {
                            v += e.b[r][k] * m[r][c] * e.b[c][l];
                        }
                    }
                    h.add(gk - self.ring, gl - self.ring, e.w * v);
                }
            }
        }
        h
    }

    fn direction(&self, u: &[f64], g: &[f64], newton: bool, rel_residual: f64) -> Result<Vec<f64>> {
        let h = self.matrix(u, newton, rel_residual);
        let mut rhs: Vec<f64> = (self.ring..self.nodes - self.ring).map(|k| -g[k]).collect();
        h.solve(&mut rhs)?;
        let mut d = vec![0.0; self.nodes];
        d[self.ring..self.nodes - self.ring].copy_from_slice(&rhs);
        Ok(d)
    }

    fn slack(&self, u: &[f64]) -> f64 {
        let el: f64 = self.elems.iter().map(|e| e.w * self.spec.big_phi(norm2(e.grad(u)))).sum();
        let ld: f64 = self.b.iter().zip(u).map(|(b, u)| (b * u).abs()).sum();
        1e-13 * (el + ld) + f64::MIN_POSITIVE
    }
}

fn axpy(u: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Energy of a nodal function.
pub fn discrete_energy(u: &GridFunction, spec: &OperatorSpec, f: &SourceTerm) -> Result<f64> {
    let b = load_vector(u, f)?;
    let elems = elements(&u.mesh);
    let el = elems.iter().map(|e| e.w * spec.big_phi(norm2(e.grad(&u.values))));
    let ld = b.iter().zip(&u.values).map(|(b, u)| -b * u);
    Ok(neumaier(el.chain(ld)))
}

/// Solves the Dirichlet problem with default iteration limits.
pub fn solve_dirichlet(
    mesh: &Arc<AnnularMesh>,
    spec: &OperatorSpec,
    f: &SourceTerm,
    bc: &BoundaryData,
    method: Method,
    tol: f64,
) -> Result<(GridFunction, EnergyReport)> {
    solve_dirichlet_with(mesh, spec, f, bc, &SolveOptions::new(method, tol))
}

/// Discrete minimizer. Non-convergence returns the last iterate with
/// `converged == false`.
pub fn solve_dirichlet_with(
    mesh: &Arc<AnnularMesh>,
    spec: &OperatorSpec,
    f: &SourceTerm,
    bc: &BoundaryData,
    opts: &SolveOptions,
) -> Result<(GridFunction, EnergyReport)> {
    bc.check(mesh)?;
    if !(spec.delta > 0.0) {
        return Err(precondition("ellipticity constant delta must be positive"));
    }
    let t = mesh.ring_size();
    let last = mesh.rings() - 1;
    let mut u = match &opts.initial {
        Some(v) if v.len() == mesh.node_count() => v.clone(),
        Some(_) => return Err(precondition("initial iterate has the wrong length")),
        None => {
            let (r0, r1) = (mesh.r_in(), mesh.r_out());
            let mut v = Vec::with_capacity(mesh.node_count());
            for i in 0..=last {
                let lam = (mesh.radii[i] - r0) / (r1 - r0);
                for j in 0..t {
                    v.push(bc.inner[j] + lam * (bc.outer[j] - bc.inner[j]));
                }
            }
            v
        }
    };
    for j in 0..t {
        u[mesh.index(0, j)] = bc.inner[j];
        u[mesh.index(last, j)] = bc.outer[j];
    }
    let bw = if mesh.is_polar() { 2 * t - 1 } else { 1 };
    let elems = elements(mesh);
    match loads(mesh, f)? {
        Loads::Fixed(b) => {
            let pb = Problem { spec, elems, b, ring: t, nodes: mesh.node_count(), bw };
            let (u, rep) = minimize(&pb, u, opts)?;
            Ok((GridFunction { mesh: mesh.clone(), values: u }, rep))
        }
        Loads::Product(m, h2) => {
            // Outer fixed point on the frozen products h2(u).
            let mut total = 0;
            let mut history = Vec::new();
            for _ in 0..100 {
                let b: Vec<f64> = m.iter().zip(&u).map(|(a, v)| a * h2(*v)).collect();
                let pb = Problem { spec, elems: elems.clone(), b, ring: t, nodes: mesh.node_count(), bw };
                let (next, rep) = minimize(&pb, u.clone(), opts)?;
                total += rep.iterations;
                history.extend(rep.history.iter().cloned());
                let change = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let size = next.iter().fold(1.0f64, |m, a| m.max(a.abs()));
                u = next;
                if change <= opts.tol * size || !rep.converged {
                    let rep = EnergyReport { iterations: total, history, ..rep };
                    return Ok((GridFunction { mesh: mesh.clone(), values: u }, rep));
                }
            }
            Err(Error::NonConvergence("fixed point on the composed source did not settle".into()))
        }
    }
}

/// Backtracking along the Newton or Kačanov direction. Returns the
/// accepted point, its energy, and whether the full step was taken.
fn line_search(pb: &Problem, u: &[f64], g: &[f64], j: f64, gn: f64, rel: f64, newton: bool) -> Option<(Vec<f64>, f64, bool)> {
    let d = pb.direction(u, g, newton, rel).ok()?;
    let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
    if !(slope < 0.0) {
        return None;
    }
    let slack = pb.slack(u);
    let mut step = 1.0;
    for k in 0..60 {
        let cand = axpy(u, step, &d);
        let jc = pb.energy(&cand);
        if jc.is_finite() {
            if jc <= j + 1e-4 * step * slope {
                return Some((cand, jc, k == 0));
            }
            // Inside roundoff: accept only if the gradient improves.
            if jc <= j + slack {
                let (gc, _) = pb.gradient(&cand);
                if pb.grad_norm(&gc) < gn {
                    return Some((cand, jc, k == 0));
                }
            }
        }
        step *= 0.5;
    }
    None
}

fn minimize(pb: &Problem, mut u: Vec<f64>, opts: &SolveOptions) -> Result<(Vec<f64>, EnergyReport)> {
    let mut j = pb.energy(&u);
    let mut history = vec![j];
    let (mut g, mut scale) = pb.gradient(&u);
    let mut gn = pb.grad_norm(&g);
    let done = |gn: f64, scale: f64| gn <= opts.tol * scale || gn == 0.0;
    let mut it = 0;
    while !done(gn, scale) && it < opts.max_iter {
        it += 1;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        let tries: &[bool] = match opts.method {
            Method::Descent => &[true, false],
            Method::DampedPicard => &[false],
        };
        for &newton in tries {
            let rel = if scale > 0.0 { gn / scale } else { 0.0 };
            if let Some((cand, jc, full)) = line_search(pb, &u, &g, j, gn, rel, newton) {
                let better = accepted.as_ref().is_none_or(|(_, ja)| jc < *ja);
                if better {
                    accepted = Some((cand, jc));
                }
                // A full Newton step is taken as is; otherwise compare with the Kačanov direction.
                if newton && full {
                    break;
                }
            }
        }
        match accepted {
            Some((cand, jc)) => {
                u = cand;
                j = jc;
                history.push(j);
                let r = pb.gradient(&u);
                g = r.0;
                scale = r.1;
                gn = pb.grad_norm(&g);
            }
            None => break,
        }
    }
    let converged = done(gn, scale);
    let rel = if scale > 0.0 { gn / scale } else { gn };
    Ok((u, EnergyReport { energy: j, gradient_norm: rel, iterations: it, converged, method: opts.method, history }))
}

/// `max |u(x) - u(y)| / |x - y|^alpha` over node pairs with `|x - y| <= diam/4`.
/// Radial meshes use every pair along one ray; polar meshes use pairs on a
/// common ray or a common circle.
pub fn holder_modulus(u: &GridFunction, alpha: f64) -> f64 {
    let mesh = &u.mesh;
    let lim = 0.5 * mesh.r_out();
    let t = mesh.ring_size();
    let mut best = 0.0f64;
    for j in 0..t {
        for a in 0..mesh.rings() {
            for b in a + 1..mesh.rings() {
                let d = mesh.radii[b] - mesh.radii[a];
                if d > lim {
                    break;
                }
                let du = (u.values[mesh.index(a, j)] - u.values[mesh.index(b, j)]).abs();
                best = best.max(du / d.powf(alpha));
            }
        }
    }
    if mesh.is_polar() {
        for i in 0..mesh.rings() {
            let r = mesh.radii[i];
            for a in 0..t {
                for b in a + 1..t {
                    let d = 2.0 * r * (0.5 * (mesh.theta(b) - mesh.theta(a))).sin().abs();
                    if d > lim || d == 0.0 {
                        continue;
                    }
                    let du = (u.values[mesh.index(i, a)] - u.values[mesh.index(i, b)]).abs();
                    best = best.max(du / d.powf(alpha));
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub boundary_ordered: bool,
    pub sources_ordered: bool,
    /// `max (u - v)` over interior nodes.
    pub max_excess: f64,
    pub holds: bool,
}

/// Checks `u <= v + tol` at interior nodes, and reports whether the
/// hypotheses (boundary ordering, load ordering) hold.
pub fn comparison_check(u: &GridFunction, v: &GridFunction, f_u: &SourceTerm, f_v: &SourceTerm, tol: f64) -> Result<ComparisonReport> {
    if u.mesh != v.mesh {
        return Err(precondition("comparison needs a common mesh"));
    }
    let mesh = &u.mesh;
    let t = mesh.ring_size();
    let last = mesh.rings() - 1;
    let mut boundary_ordered = true;
    for j in 0..t {
        for i in [0, last] {
            let k = mesh.index(i, j);
            boundary_ordered &= u.values[k] <= v.values[k] + tol;
        }
    }
    let bu = load_vector(u, f_u)?;
    let bv = load_vector(v, f_v)?;
    let sources_ordered = bu.iter().zip(&bv).all(|(a, b)| *a <= *b + tol * a.abs().max(b.abs()).max(1e-300));
    let mut excess = f64::NEG_INFINITY;
    for i in 1..last {
        for j in 0..t {
            let k = mesh.index(i, j);
            excess = excess.max(u.values[k] - v.values[k]);
        }
    }
    Ok(ComparisonReport { boundary_ordered, sources_ordered, max_excess: excess, holds: excess <= tol })
}

#[derive(Debug, Clone)]
pub struct ExhaustionConfig {
    /// Radius of `K`: 1 for `K = closed unit ball`, 0 for a point.
    pub inner_radius: f64,
    /// Outer radii `R_m = r0 * 2^m` for `m = 1..=m_max`.
    pub r0: f64,
    pub m_max: usize,
    pub per_doubling: usize,
    /// Smallest radius above 0 when `inner_radius == 0`.
    pub h_min: f64,
    /// Angular nodes (0 for radial meshes).
    pub angles: usize,
    /// Deviations are measured on `B_rho \ K`.
    pub rho: f64,
    pub method: Method,
    pub tol: f64,
}

impl Default for ExhaustionConfig {
    fn default() -> Self {
        ExhaustionConfig {
            inner_radius: 1.0,
            r0: 1.0,
            m_max: 8,
            per_doubling: 16,
            h_min: 1.0 / 1024.0,
            angles: 0,
            rho: 4.0,
            method: Method::Descent,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExhaustionReport {
    pub outer_radii: Vec<f64>,
    pub sups: Vec<f64>,
    /// `C_0 + sup phi` with `C_0` from the global barrier, when `p > n`.
    pub uniform_bound: Option<f64>,
    pub bound_holds: bool,
    /// `max_{B_rho \ K} |u_{m+1} - u_m|`, extending `u_m` by 0 beyond `R_m`.
    pub deviations: Vec<f64>,
    /// Strict decrease over the pairs with `R_m >= rho`.
    pub deviations_decreasing: bool,
    pub iterates: Vec<GridFunction>,
    pub reports: Vec<EnergyReport>,
}

impl ExhaustionReport {
    pub fn limit(&self) -> &GridFunction {
        self.iterates.last().unwrap()
    }
}

/// Solves on `B_{R_m} \ K` with `u = phi` on `dK` and `u = 0` on the outer sphere.
/// `inner` maps the angle to the boundary datum.
pub fn exhaust_exterior(
    spec: &OperatorSpec,
    f: &SourceTerm,
    inner: &dyn Fn(f64) -> f64,
    cfg: &ExhaustionConfig,
) -> Result<ExhaustionReport> {
    if !(spec.p > spec.n as f64) {
        return Err(precondition("exhaustion is run in the regime p > n"));
    }
    let decay = f.decay.ok_or_else(|| precondition("source must be decay-tagged"))?;
    if cfg.m_max == 0 {
        return Err(precondition("need m_max >= 1"));
    }
    let mut outer_radii = Vec::new();
    let mut iterates: Vec<GridFunction> = Vec::new();
    let mut reports = Vec::new();
    for m in 1..=cfg.m_max {
        let r_m = cfg.r0 * 2f64.powi(m as i32);
        if r_m <= cfg.inner_radius {
            continue;
        }
        let mesh = if cfg.inner_radius == 0.0 {
            if cfg.angles > 0 {
                return Err(precondition("a point obstacle is only supported on radial meshes"));
            }
            AnnularMesh::point(spec.n, r_m, cfg.h_min, cfg.per_doubling)?
        } else if cfg.angles > 0 {
            if spec.n != 2 {
                return Err(precondition("polar meshes are two-dimensional"));
            }
            AnnularMesh::polar_dyadic(cfg.inner_radius, r_m, cfg.per_doubling, cfg.angles)?
        } else {
            AnnularMesh::dyadic(spec.n, cfg.inner_radius, r_m, cfg.per_doubling)?
        };
        let mesh = Arc::new(mesh);
        let bc = BoundaryData::from_fn(&mesh, inner, |_| 0.0);
        let mut opts = SolveOptions::new(cfg.method, cfg.tol);
        // Warm start from the previous iterate on the shared nodes.
        if let Some(prev) = iterates.last() {
            let mut init = vec![0.0; mesh.node_count()];
            let pt = prev.mesh.ring_size();
            for (k, v) in prev.values.iter().enumerate() {
                let (i, j) = (k / pt, k % pt);
                if i < mesh.rings() {
                    init[mesh.index(i, j)] = *v;
                }
            }
            opts.initial = Some(init);
        }
        let (u, rep) = solve_dirichlet_with(&mesh, spec, f, &bc, &opts)?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!("exhaustion step R = {r_m} did not converge (gradient {:e})", rep.gradient_norm)));
        }
        outer_radii.push(r_m);
        iterates.push(u);
        reports.push(rep);
    }
    let sups: Vec<f64> = iterates.iter().map(|u| u.sup()).collect();
    let sup_phi = {
        let mesh = &iterates[0].mesh;
        (0..mesh.ring_size()).map(|j| inner(mesh.theta(j))).fold(f64::NEG_INFINITY, f64::max)
    };
    let bound = lemma2_c0(spec, decay) + sup_phi;
    let bound_holds = sups.iter().all(|s| *s <= bound * (1.0 + 1e-12));
    let mut deviations = Vec::new();
    for w in iterates.windows(2) {
        deviations.push(deviation(&w[0], &w[1], cfg.rho));
    }
    // u_m covers all of B_rho only once R_m >= rho; earlier pairs are
    // reported but not part of the monotonicity check.
    let first = outer_radii.iter().position(|r| *r >= cfg.rho * (1.0 - 1e-12)).unwrap_or(outer_radii.len());
    let checked = &deviations[first.min(deviations.len())..];
    let deviations_decreasing = checked.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0 && w[1] == 0.0);
    Ok(ExhaustionReport {
        outer_radii,
        sups,
        uniform_bound: Some(bound),
        bound_holds,
        deviations,
        deviations_decreasing,
        iterates,
        reports,
    })
}

// Nodes of `b` are a superset of those of `a` (shared lattice).
fn deviation(a: &GridFunction, b: &GridFunction, rho: f64) -> f64 {
    let t = b.mesh.ring_size();
    let mut worst = 0.0f64;
    for i in 0..b.mesh.rings() {
        let r = b.mesh.radii[i];
        if r > rho {
            break;
        }
        for j in 0..t {
            let vb = b.values[b.mesh.index(i, j)];
            let va = if i < a.mesh.rings() { a.values[a.mesh.index(i, j)] } else { 0.0 };
            worst = worst.max((vb - va).abs());
        }
    }
    worst
}

//! One function per subcommand. Each writes its artifacts and returns a JSON
//! summary plus a status that decides the exit code.

use std::sync::Arc;

use exterior_core::annulus::{exhaust_exterior, solve_dirichlet_with, ExhaustionConfig};
use exterior_core::asymptotics::{
    counterexample_suite, decay_fit, envelope_check, harnack_sphere_check, osc_prediction, sphere_stats, SphereData,
    SphereSamples, SphereStats,
};
use exterior_core::barrier::{make_lemma1, make_lemma1_prime, make_lemma2, make_lemma2_prime, Barrier, Family};
use exterior_core::mesh::{AnnularMesh, BoundaryData, GridFunction};
use exterior_core::radial::{flux_residual, solve_exterior_radial, solve_radial_bvp_with, RadialOptions};
use exterior_core::rearrangement::{rearrange, split_norm_bound, talenti_bound, SourceSharp};
use exterior_core::source::{annulus_norm, SourceKind};
use exterior_core::{Coefficient, Method, OperatorSpec, SolveOptions, SourceTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{angle_function, ExperimentConfig};
use crate::output::{num, nums, Artifacts, SCHEMA};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    NonConverged,
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NonConverged => 3,
            Status::CheckFailed => 4,
        }
    }
}

pub struct Outcome {
    pub summary: Map<String, Value>,
    pub status: Status,
}

impl Outcome {
    fn new(command: &str) -> Self {
        let mut summary = Map::new();
        summary.insert("schema".into(), json!(SCHEMA));
        summary.insert("command".into(), json!(command));
        Outcome { summary, status: Status::Ok }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    fn check(&mut self, key: &str, ok: bool) {
        self.put(key, json!(ok));
        if !ok {
            self.status = self.status.max(Status::CheckFailed);
        }
    }

    fn converged(&mut self, ok: bool) {
        self.put("converged", json!(ok));
        if !ok {
            self.status = self.status.max(Status::NonConverged);
        }
    }
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![hi];
    }
    (0..k).map(|i| if i + 1 == k { hi } else { lo * (hi / lo).powf(i as f64 / (k - 1) as f64) }).collect()
}

fn source_sup(f: &SourceTerm, lo: f64, hi: f64) -> Result<f64, CliError> {
    // Sampled on a fine grid, with a relative cushion.
    let mut best = 0.0f64;
    for r in geometric(lo.max(hi * 1e-9), hi, 4001) {
        best = best.max(f.majorant(r)?);
    }
    Ok(best * (1.0 + 1e-6))
}

pub fn barrier(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let spec = cfg.operator()?;
    let f = cfg.source(&spec)?;
    let a = cfg.f64_or("barrier", "a", 1.0)?;
    let radius = cfg.f64_or("barrier", "radius", 1.0)?;
    let family = cfg.str_or("barrier", "family", "lemma1");
    let (b, f_sup): (Barrier, Option<f64>) = match family {
        "lemma1" => {
            let f_sup = match cfg.f64_opt("barrier", "f_sup")? {
                Some(s) => s,
                None if f.is_zero() => 0.0,
                None => source_sup(&f, 0.0, radius)?,
            };
            (make_lemma1(&spec, radius, f_sup, a)?, Some(f_sup))
        }
        "lemma2" => (make_lemma2(&spec, &f, a)?, None),
        "lemma1prime" | "lemma1'" => (make_lemma1_prime(&spec, radius, &f, a)?, None),
        "lemma2prime" | "lemma2'" => (make_lemma2_prime(&spec, radius, &f, a)?, None),
        other => return Err(CliError::Config(format!("unknown barrier family '{other}'"))),
    };
    let (dlo, dhi) = b.domain();
    let r_max = cfg.f64_or("barrier", "r_max", if dhi.is_finite() { dhi } else { 10.0 * radius.max(1.0) })?;
    let r_min = cfg.f64_or("barrier", "r_min", if dlo > 0.0 { dlo } else { r_max * 1e-3 })?;
    let points = cfg.usize_or("barrier", "points", 100)?;
    let radii = geometric(r_min, r_max, points);

    // Closed form for f == 0 and constant A: a c^{-1/(p-1)} r^alpha / alpha.
    let closed = match (&spec.coeff, b.family, f_sup) {
        (Coefficient::Const(c), Family::Lemma1, Some(s)) if s == 0.0 => {
            let alpha = spec.alpha();
            Some(move |r: f64| a * c.powf(-1.0 / (spec.p - 1.0)) * r.powf(alpha) / alpha)
        }
        _ => None,
    };
    let mut rows = Vec::with_capacity(radii.len());
    let mut bound_violations = 0usize;
    let mut closed_err = 0.0f64;
    for &r in &radii {
        let v = b.eval(r)?;
        let bd = b.bounds(r);
        let slack = 1e-9 * v.abs().max(1.0);
        if v < bd.lower - slack || v > bd.upper + slack {
            bound_violations += 1;
        }
        let mut row = vec![r, v, bd.lower, bd.upper];
        if let Some(c) = &closed {
            let e = c(r);
            closed_err = closed_err.max(((v - e) / e).abs());
            row.push(e);
        }
        rows.push(row);
    }
    let mut header = vec!["r", "value", "lower", "upper"];
    if closed.is_some() {
        header.push("closed_form");
    }
    out.csv("barrier.csv", &header, &rows)?;

    let residual = b.residual_check(&f, &radii)?;
    let mut o = Outcome::new("barrier");
    o.put("family", json!(family));
    o.put("a", num(a));
    o.put("radius", num(radius));
    o.put("c_integration", num(b.c_integration));
    o.put("limit_at_infinity", b.limit_at_infinity()?.map(num).unwrap_or(Value::Null));
    o.put("bound_violations", json!(bound_violations));
    o.put("max_abs_residual", num(residual.max_abs_residual));
    o.put("min_source_gap", num(residual.min_source_gap));
    o.check("supersolution", residual.supersolution);
    o.check("bounds_hold", bound_violations == 0);
    if closed.is_some() {
        o.put("max_rel_error_closed_form", num(closed_err));
        o.check("closed_form_match", closed_err <= 1e-8);
    }
    Ok(o)
}

pub fn solve_radial(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let spec = cfg.operator()?;
    let f = cfg.source(&spec)?;
    let r_in = cfg.f64_req("geometry", "r_in")?;
    let r_out = cfg.f64_req("geometry", "r_out")?;
    let u_in = cfg.f64_or("geometry", "u_in", 0.0)?;
    let u_out = cfg.f64_or("geometry", "u_out", 0.0)?;
    let tol = cfg.f64_or("solver", "tol", 1e-12)?;
    let opts = RadialOptions { panels: cfg.usize_or("solver", "panels", 1024)?, ..RadialOptions::default() };
    let sol = solve_radial_bvp_with(&spec, &f, r_in, r_out, u_in, u_out, tol, opts)?;
    let radii = geometric(r_in, r_out, cfg.usize_or("geometry", "points", 200)?);
    let rows: Vec<Vec<f64>> = radii.iter().map(|&r| vec![r, sol.value(r), sol.derivative(r), sol.flux(r)]).collect();
    out.csv("solution.csv", &["r", "u", "du", "flux"], &rows)?;
    let inner: Vec<f64> = radii.iter().cloned().filter(|r| *r > r_in && *r < r_out).collect();
    let res = flux_residual(&sol, &inner);
    let mut o = Outcome::new("solve-radial");
    o.put("c_flux", num(sol.c_flux));
    o.put("flux_residual", num(res.max_abs));
    o.put("u_out_error", num((sol.value(r_out) - u_out).abs()));
    Ok(o)
}

struct AnnulusSetup {
    spec: OperatorSpec,
    f: SourceTerm,
    mesh: Arc<AnnularMesh>,
    bc: BoundaryData,
    opts: SolveOptions,
    constant_bc: Option<(f64, f64)>,
}

fn annulus_setup(cfg: &ExperimentConfig, seed: u64) -> Result<AnnulusSetup, CliError> {
    let spec = cfg.operator()?;
    let f = cfg.source(&spec)?;
    let r_in = cfg.f64_req("geometry", "r_in")?;
    let r_out = cfg.f64_req("geometry", "r_out")?;
    let angles = cfg.usize_or("solver", "angles", 0)?;
    let mesh = match cfg.str_or("solver", "mesh", "dyadic") {
        "dyadic" => {
            let c = cfg.usize_or("solver", "per_doubling", 16)?;
            if angles > 0 {
                AnnularMesh::polar_dyadic(r_in, r_out, c, angles)?
            } else {
                AnnularMesh::dyadic(spec.n, r_in, r_out, c)?
            }
        }
        "geometric" => {
            let g = AnnularMesh::geometric(spec.n, r_in, r_out, cfg.usize_or("solver", "cells", 64)?)?;
            if angles > 0 {
                AnnularMesh::polar(g.radii, angles)?
            } else {
                g
            }
        }
        other => return Err(CliError::Config(format!("unknown mesh '{other}'"))),
    };
    let mesh = Arc::new(mesh);
    let inner_text = cfg.str_or("boundary", "inner", "0");
    let outer_text = cfg.str_or("boundary", "outer", "0");
    let gin = angle_function(inner_text)?;
    let gout = angle_function(outer_text)?;
    let constant_bc = match (inner_text.parse::<f64>(), outer_text.parse::<f64>()) {
        (Ok(a), Ok(b)) => Some((a, b)),
        _ => None,
    };
    let bc = BoundaryData::from_fn(&mesh, |t| gin(t), |t| gout(t));
    let method = Method::parse(cfg.str_or("solver", "method", "descent"))?;
    let mut opts = SolveOptions::new(method, cfg.f64_or("solver", "tol", 1e-10)?);
    opts.max_iter = cfg.usize_or("solver", "max_iter", 500)?;
    match cfg.str_or("solver", "initial", "linear") {
        "linear" => {}
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = bc.inner.iter().chain(&bc.outer).cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = bc.inner.iter().chain(&bc.outer).cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            opts.initial = Some((0..mesh.node_count()).map(|_| rng.random_range(lo..hi)).collect());
        }
        other => return Err(CliError::Config(format!("unknown initial guess '{other}'"))),
    }
    Ok(AnnulusSetup { spec, f, mesh, bc, opts, constant_bc })
}

fn nodal_rows(u: &GridFunction) -> Vec<Vec<f64>> {
    let m = &u.mesh;
    let mut rows = Vec::with_capacity(m.node_count());
    for i in 0..m.rings() {
        for j in 0..m.ring_size() {
            rows.push(vec![i as f64, j as f64, m.radii[i], m.theta(j), u.values[m.index(i, j)]]);
        }
    }
    rows
}

const NODAL_HEADER: [&str; 5] = ["i", "j", "r", "theta", "u"];

fn is_radial(f: &SourceTerm) -> bool {
    matches!(f.kind, SourceKind::Radial(_))
}

pub fn solve_annulus(cfg: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = annulus_setup(cfg, seed)?;
    let (u, rep) = solve_dirichlet_with(&s.mesh, &s.spec, &s.f, &s.bc, &s.opts)?;
    out.csv("solution.csv", &NODAL_HEADER, &nodal_rows(&u))?;
    let hist: Vec<Vec<f64>> = rep.history.iter().enumerate().map(|(k, e)| vec![k as f64, *e]).collect();
    out.csv("energy.csv", &["iteration", "energy"], &hist)?;
    let mut o = Outcome::new("solve-annulus");
    o.put("method", json!(rep.method));
    o.put("energy", num(rep.energy));
    o.put("gradient_norm", num(rep.gradient_norm));
    o.put("iterations", json!(rep.iterations));
    o.put("nodes", json!(s.mesh.node_count()));
    o.put("sup", num(u.sup()));
    o.converged(rep.converged);
    if let (Some((a, b)), true) = (s.constant_bc, is_radial(&s.f)) {
        let exact = solve_radial_bvp_with(&s.spec, &s.f, s.mesh.r_in(), s.mesh.r_out(), a, b, 1e-12, RadialOptions::default())?;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..s.mesh.rings() {
            let e = exact.value(s.mesh.radii[i]);
            scale = scale.max(e.abs());
            for j in 0..s.mesh.ring_size() {
                err = err.max((u.values[s.mesh.index(i, j)] - e).abs());
            }
        }
        o.put("radial_oracle_error", num(err));
        o.put("radial_oracle_rel_error", num(err / scale.max(1e-300)));
    }
    Ok(o)
}

pub fn exhaust(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let spec = cfg.operator()?;
    let f = cfg.source(&spec)?;
    let d = ExhaustionConfig::default();
    let ec = ExhaustionConfig {
        inner_radius: cfg.f64_or("exhaust", "inner_radius", d.inner_radius)?,
        r0: cfg.f64_or("exhaust", "r0", d.r0)?,
        m_max: cfg.usize_or("exhaust", "m_max", d.m_max)?,
        per_doubling: cfg.usize_or("exhaust", "per_doubling", d.per_doubling)?,
        h_min: cfg.f64_or("exhaust", "h_min", d.h_min)?,
        angles: cfg.usize_or("exhaust", "angles", d.angles)?,
        rho: cfg.f64_or("exhaust", "rho", d.rho)?,
        method: Method::parse(cfg.str_or("exhaust", "method", "descent"))?,
        tol: cfg.f64_or("exhaust", "tol", d.tol)?,
    };
    let phi = angle_function(cfg.str_or("boundary", "inner", "0"))?;
    let rep = exhaust_exterior(&spec, &f, &|t| phi(t), &ec)?;
    let rows: Vec<Vec<f64>> = rep
        .outer_radii
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let dev = if k == 0 { f64::NAN } else { rep.deviations[k - 1] };
            vec![(k + 1) as f64, *r, rep.sups[k], dev, rep.reports[k].iterations as f64]
        })
        .collect();
    out.csv("iterates.csv", &["m", "outer_radius", "sup", "deviation", "iterations"], &rows)?;
    out.csv("limit.csv", &NODAL_HEADER, &nodal_rows(rep.limit()))?;
    let mut o = Outcome::new("exhaust");
    o.put("outer_radii", nums(&rep.outer_radii));
    o.put("sups", nums(&rep.sups));
    o.put("deviations", nums(&rep.deviations));
    o.put("uniform_bound", rep.uniform_bound.map(num).unwrap_or(Value::Null));
    o.put("deviations_decreasing", json!(rep.deviations_decreasing));
    o.converged(rep.reports.iter().all(|r| r.converged));
    o.check("bound_holds", rep.bound_holds);
    Ok(o)
}

pub fn rearrange_cmd(cfg: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let s = annulus_setup(cfg, seed)?;
    let (u, rep) = solve_dirichlet_with(&s.mesh, &s.spec, &s.f, &s.bc, &s.opts)?;
    let data = rearrange(&u);
    let rows: Vec<Vec<f64>> = data.values.iter().zip(&data.cumulative).map(|(v, c)| vec![*c, *v]).collect();
    out.csv("rearrangement.csv", &["cumulative_measure", "u_star"], &rows)?;
    let omega = s.mesh.measure();
    let sharp = match &s.f.kind {
        SourceKind::Grid(v) => SourceSharp::from_grid(s.spec.n, v, &s.mesh.node_measures())?,
        _ => SourceSharp::on_annulus(&s.f, s.spec.n, s.mesh.r_in(), s.mesh.r_out())?,
    };
    let boundary = s.bc.sup_abs();
    let bound = talenti_bound(boundary, &sharp, &s.spec, omega)?;
    let mut o = Outcome::new("rearrange");
    o.put("sup", num(data.sup()));
    o.put("boundary_sup", num(boundary));
    o.put("measure", num(omega));
    o.put("talenti_bound", num(bound));
    o.converged(rep.converged);
    o.check("talenti_holds", data.sup() <= bound + 1e-6);
    if let (Some(r), Some(q)) = (cfg.f64_opt("rearrange", "r_exp")?, cfg.f64_opt("rearrange", "s_exp")?) {
        let nr = annulus_norm(&s.f, s.spec.n, r, s.mesh.r_in(), s.mesh.r_out())?;
        let ns = annulus_norm(&s.f, s.spec.n, q, s.mesh.r_in(), s.mesh.r_out())?;
        let split = split_norm_bound(boundary, &s.spec, r, q, nr, ns)?;
        o.put("split_bound", num(split));
        o.check("split_holds", data.sup() <= split + 1e-6);
    }
    Ok(o)
}

/// Reads nodal CSV output (`r`, optional `theta`, `u` columns, ring-major).
pub fn read_samples(path: &std::path::Path) -> Result<SphereSamples, CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = rd.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ri, ui) = match (col("r"), col("u")) {
        (Some(r), Some(u)) => (r, u),
        _ => return Err(CliError::Config(format!("{} needs 'r' and 'u' columns", path.display()))),
    };
    let mut radii: Vec<f64> = Vec::new();
    let mut rings: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let parse = |k: usize| -> Result<f64, CliError> {
            rec.get(k).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| CliError::Config(format!("bad number in {}", path.display())))
        };
        let (r, u) = (parse(ri)?, parse(ui)?);
        if radii.last() == Some(&r) {
            rings.last_mut().unwrap().push(u);
        } else {
            radii.push(r);
            rings.push(vec![u]);
        }
    }
    Ok(SphereSamples::new(radii, rings)?)
}

pub fn asymptotics(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let spec = cfg.operator()?;
    let f = cfg.source(&spec)?;
    let data: Box<dyn SphereData> = match cfg.get("asymptotics", "input") {
        Some(path) => Box::new(read_samples(&cfg.resolve(path))?),
        None => {
            let r_in = cfg.f64_or("geometry", "r_in", 1.0)?;
            let u_in = cfg.f64_or("geometry", "u_in", 0.0)?;
            Box::new(solve_exterior_radial(&spec, &f, r_in, u_in)?)
        }
    };
    let (lo, hi) = data.radial_domain();
    let r_start = cfg.f64_or("asymptotics", "r_start", lo)?;
    let default_doublings = if hi.is_finite() { ((hi / r_start).log2() + 1e-9).floor() as usize } else { 10 };
    let doublings = cfg.usize_or("asymptotics", "doublings", default_doublings)?;
    let radii: Vec<f64> = (0..=doublings).map(|k| r_start * 2f64.powi(k as i32)).filter(|r| *r <= hi * (1.0 + 1e-12)).collect();
    let stats: Vec<SphereStats> = radii.iter().map(|r| sphere_stats(data.as_ref(), *r)).collect::<Result<_, _>>()?;
    let rows: Vec<Vec<f64>> = stats.iter().map(|s| vec![s.radius, s.m, s.big_m, s.osc]).collect();
    out.csv("spheres.csv", &["R", "m", "M", "osc"], &rows)?;

    let mut o = Outcome::new("asymptotics");
    o.put("radii", nums(&radii));
    o.put("m", nums(&stats.iter().map(|s| s.m).collect::<Vec<_>>()));
    o.put("M", nums(&stats.iter().map(|s| s.big_m).collect::<Vec<_>>()));
    o.put("osc", nums(&stats.iter().map(|s| s.osc).collect::<Vec<_>>()));
    let mut checks = Map::new();
    let mut failed = false;
    if stats.len() >= 4 {
        let fit = decay_fit(&stats, &spec, &f)?;
        o.put(
            "beta_fit",
            json!({
                "beta": num(fit.beta),
                "basis": fit.basis,
                "residual": num(fit.residual),
                "beta_positive": fit.beta_positive,
                "predicted_beta": fit.predicted_beta.map(num),
                "predicted_constant": fit.predicted_constant.map(num),
            }),
        );
        o.put(
            "limit_estimate",
            json!({
                "value": num(fit.limit),
                "uncertainty": num(fit.limit_uncertainty),
                "exists": fit.limit_exists,
                "known": data.known_limit().map(num),
            }),
        );
        let rec = fit.recurrence_holds;
        checks.insert("osc_recurrence".into(), json!(rec));
        failed |= rec == Some(false);
    } else {
        o.put("beta_fit", Value::Null);
        o.put("limit_estimate", Value::Null);
        checks.insert("osc_recurrence".into(), Value::Null);
    }
    let theta = cfg.f64_or("asymptotics", "theta", 0.5)?;
    let harnack_radii: Vec<f64> = radii.iter().cloned().filter(|r| *r >= 4.0).collect();
    let nonneg = stats.iter().all(|s| s.m >= 0.0);
    let harnack = if nonneg && !harnack_radii.is_empty() {
        match harnack_sphere_check(data.as_ref(), &f, &spec, &harnack_radii, theta) {
            Ok(h) => json!({ "fitted_constant": num(h.fitted_constant), "stable": h.stable }),
            Err(e) => json!({ "skipped": e.to_string() }),
        }
    } else {
        json!({ "skipped": "needs nonnegative data on radii >= 4" })
    };
    checks.insert("harnack".into(), harnack);
    let envelope = if spec.p >= spec.n as f64 && f.decay.is_some() {
        let env = envelope_check(data.as_ref(), &f, &spec, &radii)?;
        failed |= env.violations > 0;
        json!({ "c0": num(env.c0), "min_slack": num(env.min_slack), "violations": env.violations })
    } else {
        json!({ "skipped": "needs p >= n and a decay tag" })
    };
    checks.insert("envelope".into(), envelope);
    if let Ok(pred) = osc_prediction(&spec, &f) {
        o.put(
            "osc_prediction",
            json!({ "lambda": num(pred.lambda), "balls": pred.balls, "c": num(pred.c), "C": num(pred.big_c), "K": num(pred.k) }),
        );
    }
    o.put("checks", Value::Object(checks));
    if failed {
        o.status = Status::CheckFailed;
    }
    Ok(o)
}

pub fn counterexample(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome, CliError> {
    let p = cfg.f64_req("operator", "p")?;
    let n = cfg.usize_or("operator", "n", if p == 2.0 { 3 } else { 2 })?;
    let r_max = cfg.f64_or("counterexample", "r_max", 1e6)?;
    let radii = geometric(2.0, r_max, cfg.usize_or("counterexample", "points", 400)?);
    let extremes = cfg.usize_or("counterexample", "extremes", 4)?;
    let rep = counterexample_suite(p, n, &radii, extremes)?;
    let rows: Vec<Vec<f64>> = rep.rows.iter().map(|r| vec![r.radius, r.u, r.ratio]).collect();
    out.csv("counterexample.csv", &["r", "u", "bound_ratio"], &rows)?;
    let ext: Vec<Vec<f64>> =
        rep.extreme_values.iter().enumerate().map(|(k, v)| vec![(k + 1) as f64, ((k + 1) as f64 * std::f64::consts::PI).exp(), *v]).collect();
    out.csv("extremes.csv", &["k", "log_r", "u"], &ext)?;
    let hi = rep.extreme_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = rep.extreme_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut o = Outcome::new("counterexample");
    o.put("p", num(p));
    o.put("n", json!(n));
    o.put("fitted_constant", num(rep.fitted_constant));
    o.put("variation", num(rep.variation));
    o.put("extreme_values", nums(&rep.extreme_values));
    o.put("oscillation", num(hi - lo));
    o.put("limit_exists", json!(rep.fit.limit_exists));
    o.check("bounded", rep.bounded);
    o.check("alternates", rep.alternates);
    Ok(o)
}

//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use exterior_core::annulus::{exhaust_exterior, holder_modulus, solve_dirichlet, ExhaustionConfig};
use exterior_core::asymptotics::{counterexample_suite, decay_fit, envelope_check, osc_prediction, sphere_stats, SphereStats};
use exterior_core::barrier::{make_lemma1, make_lemma1_prime, make_lemma2, make_lemma2_prime, Barrier};
use exterior_core::expr::Expr;
use exterior_core::mesh::{AnnularMesh, BoundaryData};
use exterior_core::radial::{solve_exterior_radial, solve_radial_bvp};
use exterior_core::rearrangement::{rearrange, talenti_bound, SourceSharp};
use exterior_core::source::check_part_b_conditions;
use exterior_core::{Coefficient, Method, OperatorSpec, Profile, SourceTerm, PHI_INV_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240611;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.2}s (limit {}s)", e.as_secs_f64(), limit.as_secs()))
}

fn c1_barrier_closed_form() -> Verdict {
    let t = Instant::now();
    let spec = OperatorSpec::plap(3.0, 2).unwrap();
    let b = make_lemma1(&spec, 10.0, 0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let r = 0.1 * k as f64;
        let exact = 2.0 * r.sqrt();
        worst = worst.max(((b.eval(r).unwrap() - exact) / exact).abs());
    }
    let (fast, time) = within(t, Duration::from_secs(1));
    verdict(worst <= 1e-8 && fast, format!("max rel err {worst:.2e} <= 1e-8, {time}"))
}

fn c2_bracket_suite() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bracket_fail = 0;
    let mut round_fail = 0;
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let p = rng.random_range(1.1..6.0);
        let n = rng.random_range(2..=4usize);
        let spec = match k % 3 {
            0 => OperatorSpec::plap(p, n).unwrap(),
            1 => {
                let lo = rng.random_range(0.2..2.0);
                let hi = lo * rng.random_range(1.0..4.0);
                OperatorSpec::with_natural_bounds(p, n, Coefficient::SmoothBump { lo, hi }).unwrap()
            }
            _ => {
                // Increasing in t, so phi stays increasing for every p > 1.
                let c = rng.random_range(0.1..0.9);
                let e = Expr::parse(&format!("2 - {c}/(1 + t)"), "t").unwrap();
                OperatorSpec::new(p, n, Coefficient::Expr(e), 2.0 - c, 2.0).unwrap()
            }
        };
        let s = 10f64.powf(rng.random_range(-10.0..10.0));
        let tt = spec.phi_inverse(s, PHI_INV_TOL).unwrap();
        let phi = spec.phi(tt).unwrap();
        let tp = tt.powf(p - 1.0);
        if phi < spec.delta * tp * (1.0 - 1e-12) || phi > spec.l_up * tp * (1.0 + 1e-12) {
            bracket_fail += 1;
        }
        let rel = ((phi - s) / s).abs();
        worst = worst.max(rel);
        if rel > 1e-10 {
            round_fail += 1;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(5));
    verdict(
        bracket_fail == 0 && round_fail == 0 && fast,
        format!("10000 pairs: {bracket_fail} bracket, {round_fail} round-trip failures (worst {worst:.1e} <= 1e-10), {time}"),
    )
}

fn sample_radii(b: &Barrier) -> Vec<f64> {
    let (lo, hi) = b.domain();
    if hi.is_finite() {
        geometric(hi * 1e-3, hi, 50)
    } else if lo > 0.0 {
        geometric(lo, lo * 1e4, 50)
    } else {
        geometric(1e-3, 1e3, 50)
    }
}

fn c3_barrier_bounds() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let n = rng.random_range(2..=3usize);
        let p = n as f64 + rng.random_range(0.2..3.0);
        let eps = rng.random_range(0.1..2.0);
        let c_f = rng.random_range(0.1..5.0);
        let delta = rng.random_range(0.5..1.0);
        let l_up = delta * rng.random_range(1.0..3.0);
        let a = rng.random_range(0.0..2.0);
        let spec = OperatorSpec::with_natural_bounds(p, n, Coefficient::SmoothBump { lo: delta, hi: l_up }).unwrap();
        let f = SourceTerm::power_decay(c_f, eps, p);
        let barriers = [
            make_lemma1(&spec, rng.random_range(0.5..4.0), c_f, a).unwrap(),
            make_lemma2(&spec, &f, a).unwrap(),
            make_lemma1_prime(&spec, rng.random_range(1.0..4.0), &f, a).unwrap(),
            make_lemma2_prime(&spec, rng.random_range(1.5..4.0), &f, a).unwrap(),
        ];
        for b in &barriers {
            for r in sample_radii(b) {
                let v = b.eval(r).unwrap();
                let bd = b.bounds(r);
                let slack = 1e-9 * v.abs().max(1.0);
                let excess = (bd.lower - v).max(v - bd.upper);
                worst = worst.max(excess);
                if excess > slack {
                    violations += 1;
                }
                checked += 1;
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(30));
    verdict(violations == 0 && fast, format!("{checked} evaluations over 4 families: {violations} violations (worst excess {worst:.1e}), {time}"))
}

fn c4_radial_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let ps = [1.5, 2.0, 3.0, 4.0];
    let mut worst_order = f64::INFINITY;
    let mut worst_fine = 0.0f64;
    let mut monotone = true;
    let mut converged = true;
    let mut lines = Vec::new();
    for k in 0..10 {
        let p = ps[k % 4];
        let n = 2 + (k / 4) % 2;
        let spec = OperatorSpec::plap(p, n).unwrap();
        let c = rng.random_range(0.5..2.0);
        let f = if k % 2 == 0 { SourceTerm::constant(c) } else { SourceTerm::radial(Profile::Power { coef: c, exponent: rng.random_range(0.5..3.0) }) };
        let r_out = rng.random_range(3.0..5.0);
        let u_in = rng.random_range(0.0..1.0);
        let exact = solve_radial_bvp(&spec, &f, 1.0, r_out, u_in, 0.0, 1e-12).unwrap();
        let mut errs = Vec::new();
        for cells in [64usize, 128, 256, 512] {
            let mesh = Arc::new(AnnularMesh::geometric(n, 1.0, r_out, cells).unwrap());
            let bc = BoundaryData::constant(&mesh, u_in, 0.0);
            let (u, rep) = solve_dirichlet(&mesh, &spec, &f, &bc, Method::Descent, 1e-11).unwrap();
            converged &= rep.converged;
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for (i, r) in mesh.radii.iter().enumerate() {
                let e = exact.value(*r);
                scale = scale.max(e.abs());
                err = err.max((u.values[i] - e).abs());
            }
            errs.push(err / scale);
        }
        monotone &= errs.windows(2).all(|w| w[1] < w[0]);
        // Least-squares slope of -log2(err) against the doubling index.
        let levels = errs.len() as f64;
        let xbar = (levels - 1.0) / 2.0;
        let ybar = errs.iter().map(|e| -e.log2()).sum::<f64>() / levels;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, e) in errs.iter().enumerate() {
            sxy += (i as f64 - xbar) * (-e.log2() - ybar);
            sxx += (i as f64 - xbar).powi(2);
        }
        let order = sxy / sxx;
        worst_order = worst_order.min(order);
        worst_fine = worst_fine.max(*errs.last().unwrap());
        lines.push(format!("p={p} n={n} order {order:.2} err {:.1e}", errs.last().unwrap()));
    }
    println!("  criterion 4 detail: {}", lines.join("; "));
    let (fast, time) = within(t, Duration::from_secs(120));
    verdict(
        monotone && converged && worst_order >= 1.0 && worst_fine <= 1e-3 && fast,
        format!("10 configs, min observed order {worst_order:.2} >= 1, finest rel err {worst_fine:.1e} <= 1e-3, decreasing={monotone}, converged={converged}, {time}"),
    )
}

fn c5_exhaustion() -> Verdict {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, n, coeff) in [(3.0, 2usize, Coefficient::Const(1.0)), (4.5, 3, Coefficient::SmoothBump { lo: 1.0, hi: 2.0 })] {
        let spec = OperatorSpec::with_natural_bounds(p, n, coeff).unwrap();
        let f = SourceTerm::power_decay(1.0, 1.0, p);
        let rep = exhaust_exterior(&spec, &f, &|_| 1.0, &ExhaustionConfig::default()).unwrap();
        let converged = rep.reports.iter().all(|r| r.converged);
        ok &= rep.bound_holds && rep.deviations_decreasing && converged && rep.outer_radii.len() == 8;
        let sup = rep.sups.iter().cloned().fold(0.0f64, f64::max);
        parts.push(format!("p={p} n={n}: max sup {sup:.4} <= {:.4}, decreasing={}", rep.uniform_bound.unwrap(), rep.deviations_decreasing));
    }
    let (fast, time) = within(t, Duration::from_secs(300));
    verdict(ok && fast, format!("{}; {time}", parts.join("; ")))
}

fn c6_holder() -> Verdict {
    let spec = OperatorSpec::plap(3.0, 2).unwrap();
    let alpha = spec.alpha();
    let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
    let mut s_alpha = Vec::new();
    let mut s_plus = Vec::new();
    for (h_exp, c) in [(4, 4usize), (10, 8), (16, 16)] {
        let cfg = ExhaustionConfig {
            inner_radius: 0.0,
            m_max: 4,
            per_doubling: c,
            h_min: 2f64.powi(-h_exp),
            ..ExhaustionConfig::default()
        };
        let rep = exhaust_exterior(&spec, &f, &|_| 1.0, &cfg).unwrap();
        s_alpha.push(holder_modulus(rep.limit(), alpha));
        s_plus.push(holder_modulus(rep.limit(), alpha + 0.2));
    }
    let drift = s_alpha.windows(2).map(|w| ((w[1] - w[0]) / w[0]).abs()).fold(0.0f64, f64::max);
    let growth = s_plus.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    verdict(
        s_alpha.iter().all(|s| s.is_finite()) && drift < 0.10 && growth >= 2.0,
        format!("alpha-seminorms {:?}: drift {:.1}% < 10%; alpha+0.2 growth per refinement {growth:.2} >= 2", s_alpha.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>(), 100.0 * drift),
    )
}

fn c7_talenti() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let ps = [1.5, 1.8, 2.5, 3.0, 4.0];
    let mut worst = f64::NEG_INFINITY;
    let mut fails = 0;
    let (mut below, mut above) = (0, 0);
    for k in 0..25 {
        let p = ps[k % 5];
        let n = 2 + (k / 5) % 2;
        if p < n as f64 {
            below += 1;
        } else {
            above += 1;
        }
        let spec = OperatorSpec::with_natural_bounds(p, n, Coefficient::SmoothBump { lo: 1.0, hi: rng.random_range(1.0..2.0) }).unwrap();
        let c = rng.random_range(0.2..3.0);
        let f = match k % 3 {
            0 => SourceTerm::constant(c),
            1 => SourceTerm::radial(Profile::Power { coef: c, exponent: rng.random_range(0.5..3.0) }),
            _ => SourceTerm::radial(Profile::Expr(Expr::parse(&format!("{c}*(1 + sin(3*r))"), "r").unwrap())),
        };
        let r_out = rng.random_range(2.0..6.0);
        let a = rng.random_range(0.0..1.0);
        let b = rng.random_range(0.0..1.0);
        let mesh = if n == 2 && k % 4 == 1 {
            AnnularMesh::polar_dyadic(1.0, r_out, 8, 12).unwrap()
        } else {
            AnnularMesh::dyadic(n, 1.0, r_out, 16).unwrap()
        };
        let mesh = Arc::new(mesh);
        let bc = BoundaryData::from_fn(&mesh, |th| a * (1.0 + 0.3 * th.cos()), |_| b);
        let (u, _) = solve_dirichlet(&mesh, &spec, &f, &bc, Method::Descent, 1e-10).unwrap();
        let sharp = SourceSharp::on_annulus(&f, n, 1.0, r_out).unwrap();
        let bound = talenti_bound(bc.sup_abs(), &sharp, &spec, mesh.measure()).unwrap();
        let excess = rearrange(&u).sup() - bound;
        worst = worst.max(excess);
        if excess > 1e-6 {
            fails += 1;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(180));
    verdict(fails == 0 && fast, format!("25 solves ({below} with p<n, {above} with p>=n): {fails} failures, worst sup - bound {worst:.3e}, {time}"))
}

fn c8_envelope() -> Verdict {
    let radii: Vec<f64> = (0..=10).map(|k| 2f64.powi(k)).collect();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let cases: [(f64, usize, f64, f64, Coefficient); 6] = [
        (3.0, 2, 1.0, 1.0, Coefficient::Const(1.0)),
        (2.5, 2, 0.5, 2.0, Coefficient::Const(1.0)),
        (4.0, 3, 1.5, 0.7, Coefficient::SmoothBump { lo: 1.0, hi: 2.0 }),
        (3.0, 3, 0.8, 1.0, Coefficient::Const(1.0)),
        (5.0, 2, 0.3, 3.0, Coefficient::SmoothBump { lo: 0.5, hi: 1.5 }),
        (3.5, 3, 2.0, 1.0, Coefficient::Const(2.0)),
    ];
    for (p, n, eps, c_f, coeff) in cases {
        let spec = OperatorSpec::with_natural_bounds(p, n, coeff).unwrap();
        let f = SourceTerm::power_decay(c_f, eps, p);
        let sol = solve_exterior_radial(&spec, &f, 1.0, 0.3).unwrap();
        let env = envelope_check(&sol, &f, &spec, &radii).unwrap();
        violations += env.violations;
        min_slack = min_slack.min(env.min_slack);
    }
    verdict(violations == 0, format!("6 exterior radial solves at R = 2^0..2^10: {violations} violations, min slack {min_slack:.2e}"))
}

fn c9_decay_rate() -> Verdict {
    let spec = OperatorSpec::plap(3.0, 2).unwrap();
    let f = SourceTerm::power_decay(1.0, 1.0, 3.0);
    let sol = solve_exterior_radial(&spec, &f, 1.0, 0.0).unwrap();
    let stats: Vec<SphereStats> = (0..=10).map(|k| sphere_stats(&sol, 2f64.powi(k)).unwrap()).collect();
    let fit = decay_fit(&stats, &spec, &f).unwrap();
    let pred = osc_prediction(&spec, &f).unwrap();
    let target = 0.9 * 0.5;
    verdict(
        fit.beta > 0.0 && fit.beta >= target && pred.big_c < 1.0,
        format!("measured beta {:.4} >= {target}, C_pred = 1 - {:.3e} < 1", fit.beta, pred.c),
    )
}

fn c10_counterexample() -> Verdict {
    let t = Instant::now();
    let radii = geometric(2.0, 1e6, 400);
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, n) in [(2.0, 3usize), (3.0, 2)] {
        let rep = counterexample_suite(p, n, &radii, 4).unwrap();
        ok &= rep.bounded && rep.alternates && !rep.fit.limit_exists;
        parts.push(format!("p={p}: variation {:.2} < 10, values {:?}", rep.variation, rep.extreme_values.iter().map(|v| v.round()).collect::<Vec<_>>()));
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    verdict(ok && fast, format!("{}; {time}", parts.join("; ")))
}

fn c11_part_b() -> Verdict {
    let (p, n) = (2.0, 3usize);
    let spec = OperatorSpec::plap(p, n).unwrap();
    let theta = 0.5;
    let mut ok = p / (p - 1.0) < n as f64;
    let mut parts = Vec::new();
    for eps in [0.25, 0.5, 1.0] {
        let f = SourceTerm::power_decay(1.0, eps, p);
        let r = 0.5 * (n as f64 / (p + eps) + n as f64 / p);
        let rep = check_part_b_conditions(&f, &spec, r.max(1.0), theta).unwrap();
        let pass = rep.lr && rep.ltheta && rep.k_goes_to_zero;
        ok &= pass;
        parts.push(format!("eps={eps}: {}", if pass { "passes" } else { "FAILS" }));
    }
    let grid = [1.0, 1.1, 1.2, 1.3, 1.4];
    let f0 = SourceTerm::radial(Profile::Power { coef: 1.0, exponent: p });
    let zero_fails = grid.iter().all(|r| {
        let rep = check_part_b_conditions(&f0, &spec, *r, theta).unwrap();
        !(rep.lr && rep.ltheta && rep.k_goes_to_zero)
    });
    ok &= zero_fails;
    parts.push(format!("eps=0: {}", if zero_fails { "fails" } else { "PASSES" }));
    let g = SourceTerm::counterexample(p, n);
    let mut ce_ok = true;
    for r in grid {
        let rep = check_part_b_conditions(&g, &spec, r, theta).unwrap();
        ce_ok &= rep.ltheta && rep.k_goes_to_zero && !rep.lr;
    }
    ok &= ce_ok;
    parts.push(format!("counterexample residual: Ltheta and K -> 0 pass, Lr fails for r in {grid:?}: {ce_ok}"));
    verdict(ok, parts.join("; "))
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c12_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        Command::new(env!("CARGO_BIN_EXE_exterior"))
            .args(["suite", "--quiet", "--seed", "11", "--out"])
            .arg(dir)
            .status()
            .unwrap()
            .code()
            .unwrap()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let (ca, cb) = (run(&a), run(&b));
    let ta = read_tree(&a);
    let tb = read_tree(&b);
    let artifacts = ta.iter().filter(|(n, _)| n.ends_with(".csv") || n.ends_with(".json")).count();
    verdict(ca == 0 && cb == 0 && ta == tb && artifacts > 20, format!("suite exit codes {ca}/{cb}, {artifacts} CSV/JSON artifacts, identical = {}", ta == tb))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("barrier closed form", c1_barrier_closed_form),
        ("phi bracket and round trip", c2_bracket_suite),
        ("barrier two-sided bounds", c3_barrier_bounds),
        ("radial oracle equivalence", c4_radial_oracle),
        ("exhaustion uniform bound", c5_exhaustion),
        ("Holder exponent", c6_holder),
        ("Talenti bound", c7_talenti),
        ("envelope", c8_envelope),
        ("decay rate", c9_decay_rate),
        ("counterexample", c10_counterexample),
        ("integrability conditions", c11_part_b),
        ("determinism", c12_determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("{} criterion {:2} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
        if !v.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

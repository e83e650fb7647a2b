use std::sync::Arc;

use exterior_core::annulus::{comparison_check, solve_dirichlet};
use exterior_core::asymptotics::{decay_fit, SphereStats};
use exterior_core::barrier::{make_lemma1, make_lemma2};
use exterior_core::mesh::{AnnularMesh, BoundaryData, GridFunction};
use exterior_core::rearrangement::{rearrange, RearrangementData};
use exterior_core::{Coefficient, Method, OperatorSpec, SourceTerm, PHI_INV_TOL};
use proptest::prelude::*;

fn bump_spec(p: f64, n: usize, lo: f64, hi: f64) -> OperatorSpec {
    OperatorSpec::with_natural_bounds(p, n, Coefficient::SmoothBump { lo, hi }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_roundtrip(p in 1.2f64..5.0, n in 2usize..4, lo in 0.5f64..1.0, span in 0.0f64..3.0, ls in -8.0f64..8.0) {
        let spec = bump_spec(p, n, lo, lo + span);
        let s = 10f64.powf(ls);
        let t = spec.phi_inverse(s, PHI_INV_TOL).unwrap();
        let e = 1.0 / (p - 1.0);
        prop_assert!(t >= (s / spec.l_up).powf(e) * (1.0 - 1e-12));
        prop_assert!(t <= (s / spec.delta).powf(e) * (1.0 + 1e-12));
        prop_assert!((spec.phi(t).unwrap() - s).abs() <= 1e-10 * s);
    }

    #[test]
    fn lemma1_monotone_in_a(p in 2.1f64..4.0, a in 0.0f64..2.0, da in 0.01f64..1.0, r in 0.01f64..2.0) {
        let spec = bump_spec(p, 2, 1.0, 1.5);
        let lo = make_lemma1(&spec, 2.0, 0.3, a).unwrap();
        let hi = make_lemma1(&spec, 2.0, 0.3, a + da).unwrap();
        prop_assert!(lo.eval(r).unwrap() <= hi.eval(r).unwrap());
    }

    #[test]
    fn lemma1_continuous_as_a_vanishes(p in 2.1f64..4.0, r in 0.05f64..2.0) {
        let spec = OperatorSpec::plap(p, 2).unwrap();
        let zero = make_lemma1(&spec, 2.0, 0.5, 0.0).unwrap().eval(r).unwrap();
        let small = make_lemma1(&spec, 2.0, 0.5, 1e-9).unwrap().eval(r).unwrap();
        prop_assert!((small - zero).abs() <= 1e-6 * zero.abs().max(1e-6));
    }

    #[test]
    fn lemma2_within_bounds(p in 2.2f64..4.0, eps in 0.2f64..2.0, c_f in 0.1f64..3.0, a in 0.0f64..1.0, lr in -3.0f64..3.0) {
        let spec = bump_spec(p, 2, 1.0, 2.0);
        let f = SourceTerm::power_decay(c_f, eps, p);
        let b = make_lemma2(&spec, &f, a).unwrap();
        let r = 10f64.powf(lr);
        let v = b.eval(r).unwrap();
        let bd = b.bounds(r);
        prop_assert!(v >= bd.lower - 1e-9 * v.abs().max(1.0));
        prop_assert!(v <= bd.upper + 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn decay_fit_recovers_exponent(beta0 in 0.1f64..2.0, c1 in -2.0f64..2.0, c2 in 0.1f64..3.0) {
        let spec = OperatorSpec::plap(3.0, 2).unwrap();
        let stats: Vec<SphereStats> = (0..8)
            .map(|k| {
                let r = 2f64.powi(k);
                SphereStats::from_values(r, &[c1 + c2 * r.powf(-beta0)]).unwrap()
            })
            .collect();
        let fit = decay_fit(&stats, &spec, &SourceTerm::zero()).unwrap();
        prop_assert!((fit.beta - beta0).abs() <= 0.05 * beta0);
    }

    #[test]
    fn rearrangement_is_monotone_and_equimeasurable(vals in prop::collection::vec(-5.0f64..5.0, 1..40), q in 1.0f64..3.0) {
        let meas: Vec<f64> = (0..vals.len()).map(|k| 0.1 + 0.01 * k as f64).collect();
        let d = RearrangementData::from_cells(2, &vals, &meas).unwrap();
        prop_assert!(d.values.windows(2).all(|w| w[0] >= w[1]));
        let direct: f64 = vals.iter().zip(&meas).map(|(v, m)| v.abs().powf(q) * m).sum();
        let sorted = d.integral(|v| v.powf(q));
        prop_assert!((direct - sorted).abs() <= 1e-12 * direct.max(1.0));
        for t in [0.0, 1.0, 2.5] {
            let direct: f64 = vals.iter().zip(&meas).filter(|(v, _)| v.abs() > t).map(|(_, m)| m).sum();
            prop_assert!((d.distribution(t) - direct).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn discrete_comparison(p in 1.5f64..4.0, c1 in 0.0f64..2.0, dc in 0.0f64..1.0, a in -1.0f64..1.0, da in 0.0f64..1.0) {
        let spec = OperatorSpec::plap(p, 2).unwrap();
        let mesh = Arc::new(AnnularMesh::geometric(2, 1.0, 4.0, 24).unwrap());
        let f_u = SourceTerm::constant(c1);
        let f_v = SourceTerm::constant(c1 + dc);
        let (u, _) = solve_dirichlet(&mesh, &spec, &f_u, &BoundaryData::constant(&mesh, a, 0.0), Method::Descent, 1e-10).unwrap();
        let (v, _) = solve_dirichlet(&mesh, &spec, &f_v, &BoundaryData::constant(&mesh, a + da, da), Method::Descent, 1e-10).unwrap();
        let rep = comparison_check(&u, &v, &f_u, &f_v, 1e-9).unwrap();
        prop_assert!(rep.boundary_ordered && rep.sources_ordered);
        prop_assert!(rep.holds, "excess {}", rep.max_excess);
    }
}

#[test]
fn grid_rearrangement_preserves_measure() {
    let mesh = Arc::new(AnnularMesh::polar_dyadic(1.0, 4.0, 4, 12).unwrap());
    let u = GridFunction::from_fn(mesh.clone(), |r, t| (r - 1.0) * (2.0 + t.sin()));
    let d = rearrange(&u);
    assert!((d.total_measure - mesh.measure()).abs() <= 1e-12 * mesh.measure());
    assert_eq!(d.sup(), u.sup_abs());
}

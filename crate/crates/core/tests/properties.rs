use std::sync::OnceLock;

use proptest::prelude::*;
use symspace::hardy::{HardyProblem, WeightSpec};
use symspace::ineq::{admissible_check, lab_plan, ratio, IneqKind, IneqSpec};
use symspace::optim::maximize;
use symspace::spherical::{phi0_rank1, phi_rank1, spherical_function, RadialFunction, SphericalTransform};
use symspace::wave::{critical_decay, decay_exponent, ode_residual, propagator, WaveParams};
use symspace::{ChamberPoint, SpaceModel};

fn h3() -> SpaceModel {
    SpaceModel::hyperbolic(3).unwrap()
}

fn lab() -> &'static SphericalTransform {
    static PLAN: OnceLock<SphericalTransform> = OnceLock::new();
    PLAN.get_or_init(|| lab_plan(&h3(), 0.2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spherical_functions_are_dominated_by_the_ground_function(
        n in 2usize..8,
        lam in 0.0f64..20.0,
        r in 0.0f64..20.0,
    ) {
        let phi = phi_rank1(n, lam, r);
        let ground = phi0_rank1(n, r);
        prop_assert!(phi.abs() <= ground * (1.0 + 1e-9) + 1e-300);
        prop_assert!(ground <= 1.0 + 1e-12);
    }

    #[test]
    fn product_spherical_functions_factor(
        l1 in 0.0f64..10.0,
        l2 in 0.0f64..10.0,
        r1 in 0.0f64..8.0,
        r2 in 0.0f64..8.0,
    ) {
        let space = SpaceModel::product(&[3, 4]).unwrap();
        let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        let h = ChamberPoint::new(vec![hi, lo]).unwrap();
        let joint = spherical_function(&space, &[l1, l2], &h).unwrap();
        let split = phi_rank1(3, l1, hi) * phi_rank1(4, l2, lo);
        prop_assert!((joint - split).abs() <= 1e-12 * split.abs().max(1e-300) + 1e-300);
    }

    #[test]
    fn propagator_solves_the_oscillator(
        b in 0.1f64..5.0,
        m in 0.1f64..5.0,
        lam in 0.0f64..16.0,
        t in 0.0f64..20.0,
        u0 in -1.0f64..1.0,
        u1 in -1.0f64..1.0,
    ) {
        let p = WaveParams::linear(b, m).unwrap();
        prop_assume!(u0.abs() + u1.abs() > 1e-3);
        prop_assert!(ode_residual(&p, lam, t, u0, u1) < 1e-6);
        let start = propagator(&p, lam, 0.0).unwrap();
        prop_assert_eq!((start.a, start.b, start.da, start.db), (1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn decay_exponent_sits_below_half_damping(b in 0.01f64..10.0, m in 0.01f64..10.0) {
        let p = WaveParams::linear(b, m).unwrap();
        let star = critical_decay(&p);
        prop_assert!(star > 0.0 && star <= b / 2.0 * (1.0 + 1e-15));
        prop_assert!(decay_exponent(&p) < star);
    }

    #[test]
    fn larger_budgets_never_lose(
        cx in -2.0f64..2.0,
        cy in -2.0f64..2.0,
        small in 3usize..30,
        extra in 0usize..30,
    ) {
        let f = |x: &[f64]| -((x[0] - cx).powi(2) + 2.0 * (x[1] - cy).powi(2)) + (3.0 * x[0]).sin();
        let bounds = [(-3.0, 3.0), (-3.0, 3.0)];
        let a = maximize(f, &[0.0, 0.0], &[0.5, 0.5], &bounds, 1e-9, small);
        let b = maximize(f, &[0.0, 0.0], &[0.5, 0.5], &bounds, 1e-9, small + extra);
        prop_assert!(b.best_value >= a.best_value);
        prop_assert!(a.evaluations <= small);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sobolev_exponents_from_scaling_are_admissible_exactly(k in 1u32..12, n in 3usize..8) {
        // σ = k/8 with q fixed by the scaling relation at p = 2
        let sigma = k as f64 / 8.0;
        let space = SpaceModel::hyperbolic(n).unwrap();
        prop_assume!(sigma < n as f64 / 2.0);
        let q = 1.0 / (0.5 - sigma / n as f64);
        let spec = IneqSpec::new(IneqKind::Sobolev, &space, &[("sigma", sigma), ("p", 2.0), ("q", q)]).unwrap();
        let v = admissible_check(&spec).unwrap();
        prop_assert!(v.admissible, "{:?}", v.failed());
        prop_assert!(v.relations.iter().all(|r| r.exact));
        let off = IneqSpec::new(IneqKind::Sobolev, &space, &[("sigma", sigma), ("p", 2.0), ("q", q * 1.01)]).unwrap();
        prop_assert_eq!(admissible_check(&off).unwrap().failed(), vec!["sigma/n = 1/p - 1/q".to_string()]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ratios_are_one_homogeneous(
        width in 0.3f64..3.0,
        centre in 0.0f64..4.0,
        c in 1e-3f64..1e3,
        which in 0usize..4,
    ) {
        let spec = match which {
            0 => IneqSpec::new(IneqKind::SteinWeiss, &h3(), &[("sigma", 1.5), ("p", 2.0), ("q", 3.0), ("alpha", 0.5), ("beta", 0.5)]),
            1 => IneqSpec::new(IneqKind::Hardy, &h3(), &[("sigma", 1.0), ("p", 2.0)]),
            2 => IneqSpec::new(IneqKind::Gn, &h3(), &[("sigma", 1.0), ("p", 2.0), ("tau", 3.0), ("mu", 2.0)]),
            _ => IneqSpec::new(IneqKind::Ckn, &h3(), &[("sigma", 1.0), ("p", 2.0), ("q", 2.0), ("tau", 4.0), ("a", 0.75), ("b", 0.0), ("c", 0.0)]),
        }.unwrap();
        let u = RadialFunction::from_profile(lab().radial_grid().clone(), |r| (-((r - centre) / width).powi(2)).exp());
        let a = ratio(lab(), &spec, &u).unwrap().ratio;
        let b = ratio(lab(), &spec, &u.scaled(c)).unwrap().ratio;
        prop_assert!(a.is_finite() && a > 0.0);
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn damped_weights_satisfy_the_chain_relations(
        p in 1.2f64..3.0,
        extra in 0.0f64..2.0,
        u_exp in -1.0f64..1.0,
        v_exp in -1.0f64..1.0,
    ) {
        let q = p + extra;
        let pc = p / (p - 1.0);
        // V integrable at infinity and U finite, with margin
        let v_rate = 2.0 / (pc - 1.0) + 1.0;
        let u_rate = -(2.0 * (1.0 + q / pc) + 1.0);
        let problem = HardyProblem::new(
            &h3(),
            WeightSpec::exp_power(u_exp, u_rate),
            WeightSpec::exp_power(v_exp, v_rate),
            p,
            q,
        )
        .unwrap();
        let report = problem.report(None).unwrap();
        for r in &report.relations {
            prop_assert!(r.ok, "{} : {} vs {}", r.name, r.lhs, r.rhs);
        }
    }
}

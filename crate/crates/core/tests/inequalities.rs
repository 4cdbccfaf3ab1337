use symspace::ineq::{
    admissible_check, empirical_best_ratio, lab_plan, ratio, FamilyKind, IneqKind, IneqSpec, TestFamily,
};
use symspace::spherical::RadialFunction;
use symspace::{Error, SpaceModel};

fn stein_weiss(space: &SpaceModel) -> IneqSpec {
    IneqSpec::new(
        IneqKind::SteinWeiss,
        space,
        &[("sigma", 1.0), ("p", 2.0), ("q", 6.0), ("alpha", 0.0), ("beta", 0.0)],
    )
    .unwrap()
}

#[test]
fn best_ratio_plateaus_when_budget_doubles() {
    let h3 = SpaceModel::hyperbolic(3).unwrap();
    let family = TestFamily::standard(FamilyKind::Dilated, &h3, 8, 2024);
    let plan = lab_plan(&h3, family.min_width()).unwrap();
    let spec = stein_weiss(&h3);
    let small = empirical_best_ratio(&plan, &spec, &family, 200).unwrap();
    let large = empirical_best_ratio(&plan, &spec, &family, 400).unwrap();
    assert!(large.max_ratio >= small.max_ratio);
    assert!((large.max_ratio - small.max_ratio) / small.max_ratio < 0.05);
    assert!(small.members.iter().all(|m| m.rhs > 0.0 && m.ratio.is_finite()));
}

#[test]
fn ratios_are_reproducible() {
    let h3 = SpaceModel::hyperbolic(3).unwrap();
    let plan = lab_plan(&h3, 0.5).unwrap();
    let bump = |plan: &symspace::spherical::SphericalTransform| {
        RadialFunction::from_profile(plan.radial_grid().clone(), |r| (-r * r).exp())
    };
    let ckn = IneqSpec::new(
        IneqKind::Ckn,
        &h3,
        &[("sigma", 1.0), ("p", 2.0), ("q", 2.0), ("tau", 4.0), ("a", 0.75), ("b", 0.0), ("c", 0.0)],
    )
    .unwrap();
    for spec in [stein_weiss(&h3), ckn] {
        let a = ratio(&plan, &spec, &bump(&plan)).unwrap();
        let other = lab_plan(&h3, 0.5).unwrap();
        let b = ratio(&other, &spec, &bump(&other)).unwrap();
        assert!((a.ratio - b.ratio).abs() <= 1e-6 * a.ratio);
    }
}

#[test]
fn product_space_ratios_are_finite() {
    let space = SpaceModel::product(&[3, 3]).unwrap();
    let plan = lab_plan(&space, 0.5).unwrap();
    let u = RadialFunction::from_profile(plan.radial_grid().clone(), |r| (-r * r).exp());
    let spec = IneqSpec::new(IneqKind::Hardy, &space, &[("sigma", 1.0), ("p", 2.0)]).unwrap();
    let r = ratio(&plan, &spec, &u).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    let bad = IneqSpec::new(IneqKind::Hardy, &space, &[("sigma", 3.5), ("p", 2.0)]).unwrap();
    assert_eq!(admissible_check(&bad).unwrap().failed(), vec!["sigma < n/p".to_string()]);
    assert!(matches!(ratio(&plan, &bad, &u), Err(Error::Inadmissible(_))));
}

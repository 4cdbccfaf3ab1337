use symspace::spherical::{check_ground_estimate, phi0_rank1};
use symspace::SpaceModel;

// Reference values from 30-digit quadrature of
// φ₀(r) = ∫₀^π (cosh r − sinh r cos θ)^{-3/2} sin²θ dθ / ∫₀^π sin²θ dθ.
const H4_REFERENCE: [(f64, f64); 4] = [
    (0.01, 0.999_971_875_498_039_6),
    (1.260_826_858_717_554_2, 0.654_682_820_447_593_8),
    (5.021_607_031_056_006, 0.012_021_629_667_237_369),
    (20.0, 9.239_116_761_341_876e-12),
];

#[test]
fn h4_ground_function_matches_quadrature() {
    for (r, want) in H4_REFERENCE {
        let got = phi0_rank1(4, r);
        assert!((got / want - 1.0).abs() < 1e-12, "r={r}: {got} vs {want}");
    }
}

#[test]
fn ground_bracket_spread_by_dimension() {
    let lams = [0.0, 1.0, 4.0];
    let h3 = check_ground_estimate(&SpaceModel::hyperbolic(3).unwrap(), 0.01, 20.0, 200, &lams).unwrap();
    assert!(h3.spread <= 4.0, "{}", h3.spread);
    assert_eq!(h3.bound_violations, 0);
    // φ₀ e^{3r/2} / (1 + r) on H⁴ keeps growing toward roughly 4.94, so the
    // spread over this range sits above 4 regardless of the grid
    let h4 = check_ground_estimate(&SpaceModel::hyperbolic(4).unwrap(), 0.01, 20.0, 200, &lams).unwrap();
    assert!((h4.spread - 4.678).abs() < 1e-3, "{}", h4.spread);
    assert_eq!(h4.bound_violations, 0);
}

use deltaloop_core::strip::lowest_raw;
use deltaloop_core::{
    assemble_strip, build_curve, certify_tubular_radius, lowest_eigenvalues, solve_zeta_minus,
    solve_zeta_plus, CurveSpec, StripForm, StripGeometry, StripGrid, Variant,
};

fn observed_orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn flat_strip_ground_state_converges_to_secular_root_at_second_order() {
    let (beta, a, length) = (10.0, 1.0, 2.0);
    let exact = solve_zeta_plus(a, beta).unwrap().zeta;
    let geometry = StripGeometry::Flat { length };
    let errs: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&nu| {
            let grid = StripGrid::new(64, nu, a, length).unwrap();
            let op =
                assemble_strip(&geometry, beta, &grid, Variant::Plus, StripForm::Exact).unwrap();
            (lowest_raw(&op, 1).unwrap().values[0] - exact).abs()
        })
        .collect();
    let orders = observed_orders(&errs);
    assert!(
        orders.iter().all(|&p| p >= 1.8),
        "errors {errs:?}, orders {orders:?}"
    );
}

#[test]
fn flat_neumann_strip_matches_minus_root_after_extrapolation() {
    // Without curvature the Robin coefficient vanishes and the ends are Neumann.
    let (beta, a, length) = (10.0, 1.0, 2.0);
    let neumann = solve_zeta_minus(a, beta, 0.0).unwrap().zeta;
    let geometry = StripGeometry::Flat { length };
    let grid = StripGrid::new(64, 256, a, length).unwrap();
    let op = assemble_strip(&geometry, beta, &grid, Variant::Minus, StripForm::Exact).unwrap();
    let spec = lowest_eigenvalues(&op, 1).unwrap();
    assert!(
        (spec.values[0] - neumann).abs() <= 2.0 * spec.err_est[0] + 1e-8,
        "{} vs {neumann} (err {})",
        spec.values[0],
        spec.err_est[0]
    );
    assert!(neumann < solve_zeta_plus(a, beta).unwrap().zeta);
}

#[test]
fn circle_strip_ground_state_settles_under_refinement() {
    let curve = build_curve(&CurveSpec::circle(1.0)).unwrap();
    let radius = certify_tubular_radius(&curve, 2000).unwrap();
    let geometry = StripGeometry::from_curve(&curve, &radius);
    let beta = 20.0;
    let a = 0.3;
    let mut prev: Option<f64> = None;
    for (ns, nu) in [(64, 32), (128, 64), (256, 128)] {
        let grid = StripGrid::new(ns, nu, a, curve.length).unwrap();
        let op = assemble_strip(&geometry, beta, &grid, Variant::Plus, StripForm::Exact).unwrap();
        let k = lowest_raw(&op, 1).unwrap().values[0];
        if let Some(p) = prev {
            assert!((k - p).abs() < 0.05 * beta, "{p} -> {k}");
        }
        prev = Some(k);
    }
}

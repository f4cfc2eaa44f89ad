//! Shared fixtures for the benchmarks.

use deltaloop_core::{build_curve, certify_tubular_radius, ArcCurve, CurveSpec, TubularRadius};

pub fn unit_circle() -> ArcCurve {
    build_curve(&CurveSpec::circle(1.0)).expect("unit circle")
}

pub fn ellipse_2_1() -> ArcCurve {
    build_curve(&CurveSpec::ellipse(2.0, 1.0)).expect("ellipse")
}

pub fn radius(curve: &ArcCurve) -> TubularRadius {
    certify_tubular_radius(curve, 2000).expect("tubular radius")
}

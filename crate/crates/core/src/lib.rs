//! Spectral bounds for the planar Schrödinger operator `−Δ − β δ(· − Γ)` with
//! a strong attractive δ-interaction supported on a closed smooth curve `Γ`.
//!
//! The crate provides
//! - curve geometry in arc-length parametrization and a certified tubular
//!   half-width ([`curve`]),
//! - the periodic comparison operators on the curve ([`operator1d`]),
//! - exact transverse eigenvalues from secular equations ([`transverse`]),
//! - two-sided eigenvalue and counting bounds by Dirichlet–Neumann
//!   bracketing, with β-sweeps ([`bracketing`]),
//! - an independent finite-difference solver on the curvilinear strip
//!   ([`strip`]).
//!
//! The essential spectrum of the full operator is `[0, ∞)`; only negative
//! eigenvalues are computed.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bracketing;
pub mod curve;
pub mod error;
pub mod linalg;
pub mod operator1d;
pub mod strip;
pub mod transverse;

pub use bracketing::{
    bracket_eigenvalues, choose_a, count_discrete_spectrum, sweep_theorem1, sweep_theorem2,
    AsymptoticsReport, BracketConfig, BracketTable, ChosenA, CountBounds,
};
pub use curve::{
    build_curve, certify_tubular_radius, curvature_profile, jacobian_det, tubular_map, ArcCurve,
    CurveSpec, TubularRadius,
};
pub use error::{Error, Result};
pub use operator1d::{
    build_s, build_u, count_extrapolated_below, eigenvalues_1d, potential_bounds_vpm, potential_v,
    Boundary, Grid1D, Operator1D, Sign, Spectrum1D,
};
pub use strip::{
    assemble_strip, lowest_eigenvalues, pushforward_eigenfunction, StripForm, StripGeometry,
    StripGrid, StripOperator, StripSpectrum,
};
pub use transverse::{
    fd_ground_state, fd_transverse_oracle, positive_floor_minus, secular_g_plus, solve_zeta_minus,
    solve_zeta_plus, verify_single_negative, TransverseProblem, TransverseResult, Variant,
};

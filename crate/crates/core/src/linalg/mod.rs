//! Linear algebra kernels used by the discretizations.

pub mod banded;
pub mod sparse;
pub mod subspace;
pub mod tridiag;

pub use banded::{BandedCholesky, BandedSym};
pub use sparse::CsrMatrix;
pub use subspace::{lowest_eigenpairs, EigenPairs, SubspaceOptions};
pub use tridiag::SymTridiag;

/// Richardson extrapolation for a second-order method with grid ratio 2:
/// returns the extrapolated value and the error estimate `|fine − coarse|/3`.
pub fn richardson2(fine: f64, coarse: f64) -> (f64, f64) {
    let d = fine - coarse;
    (fine + d / 3.0, d.abs() / 3.0)
}

//! Dense complex linear algebra primitives for frequency-domain stability
//! analysis: eigendecomposition via the complex Schur form, sign-split
//! invariant subspaces with spectral projectors, subspace determinants,
//! nullspaces, pseudo-inverses and decaying matrix exponentials.
//!
//! Everything operates on `nalgebra::DMatrix<Complex64>` values; all
//! operations are pure functions, so values can be shared freely between
//! worker threads.

mod cmatrix;
mod error;
mod expm;
mod schur;
mod split;
mod svd_ops;

pub use cmatrix::{
    cmat_from_real_rows, cmat_from_rows, cvec_from_real, is_finite_matrix, normalize_row_phases,
    opnorm2, CMatrix, CVector,
};
pub use error::SpectralError;
pub use expm::{decaying_exponential_apply, expm, solve_lyapunov_stable};
pub use schur::{schur, schur_reorder, SchurForm};
pub use split::{spectral_split, SpectralSplit};
pub use svd_ops::{
    eig, left_annihilator, nullspace, orthonormal_columns, pseudo_inverse, rank, subspace_det,
    PseudoInverse, SubspaceBasis,
};

/// Default relative tolerance separating spectra across the imaginary axis.
pub const DEFAULT_AXIS_TOL: f64 = 1e-9;
/// Default relative threshold below which singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

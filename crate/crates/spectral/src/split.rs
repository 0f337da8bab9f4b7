//! Sign-split invariant subspaces: stable/unstable bases and spectral
//! projectors of a square complex matrix, computed from a reordered Schur
//! form (one triangular Sylvester solve for the projector). Robust under
//! near-defective spectra, unlike eigenvector-matrix inversions.

use crate::cmatrix::CMatrix;
use crate::schur::{schur, schur_reorder};
use crate::SpectralError;
use num_complex::Complex64;

/// Stable/unstable eigenspace bases and projectors of a matrix.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub eigenvalues: Vec<Complex64>,
    /// Orthonormal columns spanning the invariant subspace for Re < 0.
    pub stable_basis: CMatrix,
    /// Orthonormal columns spanning the invariant subspace for Re > 0.
    pub unstable_basis: CMatrix,
    /// Spectral projector onto the stable subspace along the unstable one.
    pub pi_minus: CMatrix,
    /// Complementary projector; `pi_minus + pi_plus = I`.
    pub pi_plus: CMatrix,
    /// min |Re lambda| over the spectrum.
    pub gap_width: f64,
}

impl SpectralSplit {
    pub fn stable_dim(&self) -> usize {
        self.stable_basis.ncols()
    }
    pub fn unstable_dim(&self) -> usize {
        self.unstable_basis.ncols()
    }
}

/// Solve the triangular Sylvester equation `A X - X B = C` where A (k x k)
/// and B (m x m) are upper triangular with disjoint spectra.
fn sylvester_triangular(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix, SpectralError> {
    let k = a.nrows();
    let m = b.nrows();
    let mut x = CMatrix::zeros(k, m);
    for j in 0..m {
        // rhs = C[:, j] + sum_{l<j} X[:, l] B[l, j]
        let mut rhs: Vec<Complex64> = (0..k).map(|i| c[(i, j)]).collect();
        for l in 0..j {
            let blj = b[(l, j)];
            for i in 0..k {
                rhs[i] += x[(i, l)] * blj;
            }
        }
        // (A - B[j,j] I) x_j = rhs, back substitution on the upper triangle.
        let shift = b[(j, j)];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for l in i + 1..k {
                s -= a[(i, l)] * x[(l, j)];
            }
            let d = a[(i, i)] - shift;
            if d.norm() == 0.0 {
                return Err(SpectralError::Singular("sylvester_triangular"));
            }
            x[(i, j)] = s / d;
        }
    }
    Ok(x)
}

/// Split a square matrix into its stable (Re < 0) and unstable (Re > 0)
/// invariant subspaces. Fails with `GlancingOrCharacteristic` when an
/// eigenvalue lies within `tol * ||M||_F` of the imaginary axis.
pub fn spectral_split(m: &CMatrix, tol: f64) -> Result<SpectralSplit, SpectralError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(SpectralError::NonSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut form = schur(m)?;
    let mut eigenvalues = form.eigenvalues();
    eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let gap_width = eigenvalues
        .iter()
        .map(|e| e.re.abs())
        .fold(f64::INFINITY, f64::min);
    if gap_width < tol * scale {
        return Err(SpectralError::GlancingOrCharacteristic {
            gap: gap_width,
            tol: tol * scale,
        });
    }

    let select_stable: Vec<bool> = form.eigenvalues().iter().map(|e| e.re < 0.0).collect();
    let k = schur_reorder(&mut form, &select_stable);
    let stable_basis = form.q.columns(0, k).into_owned();

    // Projector from the stable-leading Schur form: pi_- = Q [I X; 0 0] Q^H
    // with T11 X - X T22 = T12.
    let pi_minus = if k == 0 {
        CMatrix::zeros(n, n)
    } else if k == n {
        CMatrix::identity(n, n)
    } else {
        let t11 = form.t.view((0, 0), (k, k)).into_owned();
        let t22 = form.t.view((k, k), (n - k, n - k)).into_owned();
        let t12 = form.t.view((0, k), (k, n - k)).into_owned();
        let x = sylvester_triangular(&t11, &t22, &t12)?;
        let mut core = CMatrix::zeros(n, n);
        for i in 0..k {
            core[(i, i)] = Complex64::new(1.0, 0.0);
        }
        core.view_mut((0, k), (k, n - k)).copy_from(&x);
        &form.q * core * form.q.adjoint()
    };
    let pi_plus = CMatrix::identity(n, n) - &pi_minus;

    // Unstable basis from a second reordering (unstable leading).
    let mut form_u = schur(m)?;
    let select_unstable: Vec<bool> = form_u.eigenvalues().iter().map(|e| e.re > 0.0).collect();
    let ku = schur_reorder(&mut form_u, &select_unstable);
    debug_assert_eq!(k + ku, n);
    let unstable_basis = form_u.q.columns(0, ku).into_owned();

    Ok(SpectralSplit {
        eigenvalues,
        stable_basis,
        unstable_basis,
        pi_minus,
        pi_plus,
        gap_width,
    })
}

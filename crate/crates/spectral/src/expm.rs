//! Matrix exponentials and the decaying-exponential action on a stable
//! invariant subspace, plus the Lyapunov solve used for closed-form
//! L^2[0, inf) norms of exponentially decaying profiles.

use crate::cmatrix::CMatrix;
use crate::schur::schur;
use crate::split::SpectralSplit;
use crate::{CVector, SpectralError};
use num_complex::Complex64;

/// Dense matrix exponential by scaling and squaring with a Taylor kernel.
/// Sized for the small, well-scaled matrices that arise here.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm needs a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let norm = m.norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * Complex64::new(0.5f64.powi(s), 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
        if term.norm() < 1e-18 * sum.norm().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Evaluate `e^{z A} v` for `v` in the stable invariant subspace of `A`,
/// working entirely in the restriction of `A` to that subspace so the
/// unstable directions never enter. Errors if `v` leaves the subspace by
/// more than `tol * ||v||`.
pub fn decaying_exponential_apply(
    a: &CMatrix,
    split: &SpectralSplit,
    z: f64,
    v: &CVector,
    tol: f64,
) -> Result<CVector, SpectralError> {
    let vnorm = v.norm();
    let leak = (&split.pi_plus * v).norm();
    if leak > tol * vnorm.max(1e-300) + 1e-14 {
        return Err(SpectralError::NotInStableSubspace(leak / vnorm.max(1e-300)));
    }
    let b = &split.stable_basis;
    if b.ncols() == 0 {
        return Ok(CVector::zeros(v.len()));
    }
    let a_restricted = b.adjoint() * a * b;
    let coords = b.adjoint() * v;
    let e = expm(&(a_restricted * Complex64::new(z, 0.0)));
    Ok(b * (e * coords))
}

/// Solve `H^H X + X H = -I` for a stable matrix H (all Re(eig) < 0), via the
/// Schur form. Then `int_0^inf |e^{xH} v|^2 dx = v^H X v`.
pub fn solve_lyapunov_stable(h: &CMatrix) -> Result<CMatrix, SpectralError> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(SpectralError::NonSquare {
            rows: n,
            cols: h.ncols(),
        });
    }
    let form = schur(h)?;
    let t = &form.t;
    // T^H Y + Y T = -I entrywise, increasing (i, j).
    let mut y = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut rhs = if i == j {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in 0..i {
                rhs -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                rhs -= y[(i, k)] * t[(k, j)];
            }
            let d = t[(i, i)].conj() + t[(j, j)];
            if d.norm() == 0.0 {
                return Err(SpectralError::Singular("lyapunov"));
            }
            y[(i, j)] = rhs / d;
        }
    }
    Ok(&form.q * y * form.q.adjoint())
}

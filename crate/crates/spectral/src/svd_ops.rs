//! Eigendecomposition, nullspaces, pseudo-inverses and subspace determinants.

use crate::cmatrix::{is_finite_matrix, normalize_row_phases, CMatrix};
use crate::schur::schur;
use crate::{SpectralError, DEFAULT_RANK_TOL};
use num_complex::Complex64;

/// Subspace of C^n carried as a matrix with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    pub basis: CMatrix,
}

impl SubspaceBasis {
    pub fn new(basis: CMatrix) -> Self {
        Self {
            ambient_dim: basis.nrows(),
            basis,
        }
    }
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Eigenvalues and right eigenvectors, eigenvalues sorted by (Re, Im)
/// ascending. Eigenvectors come from triangular back-substitution on the
/// Schur form; for defective clusters they may repeat directions.
pub fn eig(m: &CMatrix) -> Result<(Vec<Complex64>, CMatrix), SpectralError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(SpectralError::NonSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    let form = schur(m)?;
    let t = &form.t;
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[i] = Complex64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in j + 1..=i {
                s += t[(j, k)] * y[k];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < f64::EPSILON * tnorm {
                d = Complex64::new(f64::EPSILON * tnorm, 0.0);
            }
            y[j] = -s / d;
        }
        let yv = CMatrix::from_column_slice(n, 1, &y);
        let mut v = &form.q * yv;
        let nv = v.norm();
        if nv > 0.0 {
            v /= Complex64::new(nv, 0.0);
        }
        pairs.push((lambda, v.column(0).iter().cloned().collect()));
    }
    pairs.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    let eigenvalues: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok((eigenvalues, vectors))
}

fn svd_triplet(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    (u, sv, v_t)
}

/// Numerical rank with singular values below `tol * sigma_max` counting as
/// zero.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > tol * smax)
        .count()
}

/// Orthonormal basis of `{v : G v = 0}` (columns). An empty basis is legal.
pub fn nullspace(g: &CMatrix, tol: f64) -> SubspaceBasis {
    let n = g.ncols();
    if g.nrows() == 0 {
        return SubspaceBasis::new(CMatrix::identity(n, n));
    }
    if !is_finite_matrix(g) {
        // Callers validate; treat as empty to stay total.
        return SubspaceBasis::new(CMatrix::zeros(n, 0));
    }
    let (_u, sv, v_t) = svd_triplet(g);
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let mut cols: Vec<usize> = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if smax == 0.0 || s <= tol * smax {
            cols.push(i);
        }
    }
    // Rows of v_t beyond the singular-value count also span the kernel
    // (v_t is full n x n only when nalgebra returns the complete factor; it
    // returns the thin factor, so append the missing complement by
    // projecting out the row space).
    let k_thin = sv.len();
    let mut basis_cols: Vec<CMatrix> = Vec::new();
    for &i in &cols {
        let row = v_t.row(i);
        let col = CMatrix::from_fn(n, 1, |r, _| row[r].conj());
        basis_cols.push(col);
    }
    if k_thin < n {
        // Complement of the span of all v_t rows.
        let vt_full = v_t.clone();
        let proj_rows = vt_full.adjoint() * &vt_full; // n x n projector onto row space
        let id = CMatrix::identity(n, n);
        let complement = &id - proj_rows;
        // Orthonormalize the complement and append.
        let extra = orthonormal_columns(&complement, 1e-12);
        for j in 0..extra.ncols() {
            let col = CMatrix::from_fn(n, 1, |r, _| extra[(r, j)]);
            basis_cols.push(col);
        }
    }
    if basis_cols.is_empty() {
        return SubspaceBasis::new(CMatrix::zeros(n, 0));
    }
    let mut raw = CMatrix::zeros(n, basis_cols.len());
    for (j, c) in basis_cols.iter().enumerate() {
        raw.column_mut(j).copy_from(&c.column(0));
    }
    // Re-orthonormalize (guards against duplicated directions) and fix
    // phases for determinism.
    let mut b = orthonormal_columns(&raw, 1e-12);
    let mut bt = b.transpose();
    normalize_row_phases(&mut bt);
    b = bt.transpose();
    SubspaceBasis::new(b)
}

/// Orthonormal basis of the column span of `m` (modified Gram-Schmidt with
/// re-orthogonalization; columns with norm below `tol * max` are dropped).
pub fn orthonormal_columns(m: &CMatrix, tol: f64) -> CMatrix {
    let n = m.nrows();
    let mut cols: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    let col_scale = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.dotc(&v);
                v -= q * proj;
            }
        }
        let nv = v.norm();
        if nv > tol * col_scale {
            v /= Complex64::new(nv, 0.0);
            cols.push(v);
        }
    }
    let mut out = CMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).copy_from(c);
    }
    out
}

/// Orthonormal rows annihilating the columns of `m` from the left
/// (`A m = 0`, rows of the result orthonormal). Rows span the orthogonal
/// complement of the column span.
pub fn left_annihilator(m: &CMatrix, tol: f64) -> CMatrix {
    let ker = nullspace(&m.adjoint(), tol);
    let mut rows = ker.basis.adjoint();
    normalize_row_phases(&mut rows);
    rows
}

/// Determinant of `[B1 | B2]`; |result| is invariant under unitary
/// re-basing of either argument.
pub fn subspace_det(b1: &SubspaceBasis, b2: &SubspaceBasis) -> Result<Complex64, SpectralError> {
    if b1.ambient_dim != b2.ambient_dim {
        return Err(SpectralError::DimensionMismatch(format!(
            "ambient dims {} vs {}",
            b1.ambient_dim, b2.ambient_dim
        )));
    }
    let n = b1.ambient_dim;
    if b1.dim() + b2.dim() != n {
        return Err(SpectralError::DimensionMismatch(format!(
            "dim {} + dim {} != ambient {}",
            b1.dim(),
            b2.dim(),
            n
        )));
    }
    let mut m = CMatrix::zeros(n, n);
    m.view_mut((0, 0), (n, b1.dim())).copy_from(&b1.basis);
    m.view_mut((0, b1.dim()), (n, b2.dim()))
        .copy_from(&b2.basis);
    Ok(m.determinant())
}

#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub pinv: CMatrix,
    /// Operator 2-norm of the input.
    pub norm: f64,
    /// Operator 2-norm of the pseudoinverse (1 / sigma_min).
    pub pinv_norm: f64,
}

/// Moore-Penrose pseudoinverse `G^H (G G^H)^{-1}` of a full-row-rank matrix,
/// with the operator norms reported alongside.
pub fn pseudo_inverse(g: &CMatrix) -> Result<PseudoInverse, SpectralError> {
    let (_u, sv, _vt) = svd_triplet(g);
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if g.nrows() > g.ncols() || smax == 0.0 || smin <= DEFAULT_RANK_TOL * smax {
        return Err(SpectralError::RankDeficient(if smax == 0.0 {
            0.0
        } else {
            smin / smax
        }));
    }
    let gram = g * g.adjoint();
    let gram_inv = gram
        .try_inverse()
        .ok_or(SpectralError::Singular("pseudo_inverse gram"))?;
    Ok(PseudoInverse {
        pinv: g.adjoint() * gram_inv,
        norm: smax,
        pinv_norm: 1.0 / smin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::{cmat_from_real_rows, cmat_from_rows};
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn eig_diagonal_sorted() {
        let m = cmat_from_real_rows(2, 2, &[2.0, 0.0, 0.0, -3.0]).unwrap();
        let (ev, _) = eig(&m).unwrap();
        assert!((ev[0] - Complex64::new(-3.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eig_companion_matches_quadratic_formula() {
        // Companion of mu^2 - mu - 1: eigenvalues (1 +- sqrt 5)/2.
        let m = cmat_from_real_rows(2, 2, &[0.0, 1.0, 1.0, 1.0]).unwrap();
        let (ev, vecs) = eig(&m).unwrap();
        let golden = 5.0f64.sqrt();
        assert!((ev[0].re - (1.0 - golden) / 2.0).abs() < 1e-12);
        assert!((ev[1].re - (1.0 + golden) / 2.0).abs() < 1e-12);
        // residual check M v = lambda v
        for k in 0..2 {
            let v = vecs.column(k).into_owned();
            let res = &m * &v - &v * ev[k];
            assert!(res.norm() < 1e-11);
        }
    }

    #[test]
    fn nullspace_examples() {
        // (1, 0) -> span e2
        let g = cmat_from_real_rows(1, 2, &[1.0, 0.0]).unwrap();
        let ns = nullspace(&g, DEFAULT_RANK_TOL);
        assert_eq!(ns.dim(), 1);
        assert!(ns.basis[(0, 0)].norm() < 1e-12);
        assert!((ns.basis[(1, 0)].re - 1.0).abs() < 1e-12);
        // identity -> empty basis
        let id = CMatrix::identity(3, 3);
        assert_eq!(nullspace(&id, DEFAULT_RANK_TOL).dim(), 0);
        // zero rows -> everything
        let z = CMatrix::zeros(2, 3);
        assert_eq!(nullspace(&z, DEFAULT_RANK_TOL).dim(), 3);
        // wide matrix: thin svd complement path
        let w = cmat_from_real_rows(1, 4, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let ns = nullspace(&w, DEFAULT_RANK_TOL);
        assert_eq!(ns.dim(), 3);
        let prod = &w * &ns.basis;
        assert!(prod.norm() < 1e-12);
    }

    #[test]
    fn subspace_det_hand_value() {
        // B1 = span e2, B2 = span (1,1)/sqrt 2 -> |det| = 1/sqrt 2.
        let b1 = SubspaceBasis::new(cmat_from_real_rows(2, 1, &[0.0, 1.0]).unwrap());
        let s = 1.0 / 2.0f64.sqrt();
        let b2 = SubspaceBasis::new(cmat_from_real_rows(2, 1, &[s, s]).unwrap());
        let d = subspace_det(&b1, &b2).unwrap();
        assert!((d.norm() - s).abs() < 1e-12);
    }

    #[test]
    fn subspace_det_unitary_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let n = rng.random_range(2..6usize);
            let k = rng.random_range(1..n);
            let raw1 = CMatrix::from_fn(n, k, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let raw2 = CMatrix::from_fn(n, n - k, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let b1 = SubspaceBasis::new(orthonormal_columns(&raw1, 1e-12));
            let b2 = SubspaceBasis::new(orthonormal_columns(&raw2, 1e-12));
            if b1.dim() != k || b2.dim() != n - k {
                continue;
            }
            let d0 = subspace_det(&b1, &b2).unwrap().norm();
            // Random unitary on the first factor (QR of random).
            let rnd = CMatrix::from_fn(k, k, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let u = orthonormal_columns(&rnd, 1e-12);
            if u.ncols() != k {
                continue;
            }
            let b1u = SubspaceBasis::new(&b1.basis * u);
            let d1 = subspace_det(&b1u, &b2).unwrap().norm();
            assert!((d0 - d1).abs() < 1e-10, "unitary invariance violated");
        }
    }

    #[test]
    fn pseudo_inverse_examples() {
        let g = cmat_from_real_rows(1, 2, &[1.0, 0.0]).unwrap();
        let p = pseudo_inverse(&g).unwrap();
        assert!((p.pinv[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(p.pinv[(1, 0)].norm() < 1e-12);
        let two_i = cmat_from_real_rows(2, 2, &[2.0, 0.0, 0.0, 2.0]).unwrap();
        let p = pseudo_inverse(&two_i).unwrap();
        assert!((p.pinv[(0, 0)].re - 0.5).abs() < 1e-12);
        // G G^+ = I
        let probe = &g * &pseudo_inverse(&g).unwrap().pinv;
        assert!((probe - CMatrix::identity(1, 1)).norm() < 1e-12);
        // rank deficient
        let z =
            cmat_from_rows(1, 2, &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(
            pseudo_inverse(&z),
            Err(SpectralError::RankDeficient(_))
        ));
    }

    #[test]
    fn left_annihilator_kills_columns() {
        let m = cmat_from_real_rows(3, 1, &[1.0, 1.0, 0.0]).unwrap();
        let a = left_annihilator(&m, DEFAULT_RANK_TOL);
        assert_eq!(a.nrows(), 2);
        assert!((&a * &m).norm() < 1e-12);
        let gram = &a * a.adjoint();
        assert!((gram - CMatrix::identity(2, 2)).norm() < 1e-12);
    }
}

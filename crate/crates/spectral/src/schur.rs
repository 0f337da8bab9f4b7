//! Complex Schur decomposition `M = Q T Q^H` (Q unitary, T upper triangular)
//! with eigenvalue reordering by unitary similarity.
//!
//! Hessenberg reduction by Householder reflectors, then single-shift QR
//! iteration with Wilkinson shifts and Givens bulge chasing. Reordering swaps
//! adjacent diagonal entries with one Givens rotation each, so leading columns
//! of Q span any selected invariant subspace.

use crate::cmatrix::{is_finite_matrix, CMatrix};
use crate::SpectralError;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone)]
pub struct SchurForm {
    /// Unitary factor.
    pub q: CMatrix,
    /// Upper triangular factor; eigenvalues on the diagonal.
    pub t: CMatrix,
}

impl SchurForm {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Max residual of `M Q - Q T`, for diagnostics and tests.
    pub fn residual(&self, m: &CMatrix) -> f64 {
        (m * &self.q - &self.q * &self.t).norm()
    }
}

/// Unitary Givens pair (c, s) with |c|^2 + |s|^2 = 1 mapping (x, z) to (h, 0)
/// under (conj(c) x + conj(s) z, -s x + c z).
fn givens(x: Complex64, z: Complex64) -> (Complex64, Complex64) {
    let h = (x.norm_sqr() + z.norm_sqr()).sqrt();
    if h == 0.0 {
        (ONE, ZERO)
    } else {
        (x / h, z / h)
    }
}

/// Apply the rotation to rows (i, i+1) of `m`, columns `cols`.
fn rot_rows(m: &mut CMatrix, i: usize, c: Complex64, s: Complex64, cols: std::ops::Range<usize>) {
    for j in cols {
        let a = m[(i, j)];
        let b = m[(i + 1, j)];
        m[(i, j)] = c.conj() * a + s.conj() * b;
        m[(i + 1, j)] = -s * a + c * b;
    }
}

/// Apply the conjugate rotation to columns (j, j+1) of `m`, rows `rows`.
fn rot_cols(m: &mut CMatrix, j: usize, c: Complex64, s: Complex64, rows: std::ops::Range<usize>) {
    for i in rows {
        let a = m[(i, j)];
        let b = m[(i, j + 1)];
        m[(i, j)] = c * a + s * b;
        m[(i, j + 1)] = -s.conj() * a + c.conj() * b;
    }
}

/// Reduce to upper Hessenberg form, accumulating the transformation in `q`.
fn hessenberg(h: &mut CMatrix, q: &mut CMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        // Householder vector for column k below the subdiagonal.
        let m = n - k - 1;
        let mut v: Vec<Complex64> = (0..m).map(|i| h[(k + 1 + i, k)]).collect();
        let norm_x = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * norm_x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // Left: rows k+1..n, all columns from k.
        for j in k..n {
            let dot: Complex64 = (0..m).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..m {
                let upd = 2.0 * v[i] * dot;
                h[(k + 1 + i, j)] -= upd;
            }
        }
        // Right: columns k+1..n, all rows.
        for i in 0..n {
            let dot: Complex64 = (0..m).map(|j| h[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..m {
                let upd = 2.0 * dot * v[j].conj();
                h[(i, k + 1 + j)] -= upd;
            }
        }
        // Accumulate into q (right multiplication).
        for i in 0..n {
            let dot: Complex64 = (0..m).map(|j| q[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..m {
                let upd = 2.0 * dot * v[j].conj();
                q[(i, k + 1 + j)] -= upd;
            }
        }
    }
    // Clear sub-Hessenberg dust.
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = ZERO;
        }
    }
}

/// Wilkinson shift from the trailing 2x2 of the active block.
fn wilkinson_shift(h: &CMatrix, m: usize) -> Complex64 {
    let a = h[(m - 1, m - 1)];
    let b = h[(m - 1, m)];
    let c = h[(m, m - 1)];
    let d = h[(m, m)];
    let tr_half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let sq = disc.sqrt();
    let l1 = tr_half + sq;
    let l2 = tr_half - sq;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition. Requires a square matrix with finite entries.
pub fn schur(m: &CMatrix) -> Result<SchurForm, SpectralError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(SpectralError::NonSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    if !is_finite_matrix(m) {
        return Err(SpectralError::NonFinite);
    }
    let mut t = m.clone();
    let mut q = CMatrix::identity(n, n);
    if n <= 1 {
        return Ok(SchurForm { q, t });
    }
    hessenberg(&mut t, &mut q);

    let eps = f64::EPSILON;
    let max_sweeps = 60 * n.max(4);
    let mut hi = n - 1;
    let mut stuck = 0usize;
    let mut sweeps = 0usize;
    while hi > 0 {
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(SpectralError::NumericalFailure(max_sweeps));
        }
        // Deflate negligible subdiagonals within 0..=hi.
        let mut lo = hi;
        while lo > 0 {
            let s = t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm();
            let s = if s == 0.0 { t.norm() } else { s };
            if t[(lo, lo - 1)].norm() <= eps * s {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            stuck = 0;
            continue;
        }
        stuck += 1;
        let mu = if stuck % 12 == 0 {
            // Exceptional shift to break symmetry-induced stalls.
            let mag = t[(hi, hi - 1)].norm()
                + if hi >= 2 {
                    t[(hi - 1, hi - 2)].norm()
                } else {
                    0.0
                };
            t[(hi, hi)] + Complex64::new(0.75 * mag, 0.0)
        } else {
            wilkinson_shift(&t, hi)
        };
        // Single-shift QR sweep with bulge chasing on lo..=hi.
        let mut x = t[(lo, lo)] - mu;
        let mut z = t[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, z);
            let col_start = k.saturating_sub(1).max(lo);
            rot_rows(&mut t, k, c, s, col_start..n);
            let row_end = (k + 3).min(hi + 1);
            rot_cols(&mut t, k, c, s, 0..row_end);
            rot_cols(&mut q, k, c, s, 0..n);
            if k + 2 <= hi {
                x = t[(k + 1, k)];
                z = t[(k + 2, k)];
            }
        }
    }
    // Zero out the strictly lower part (rounding dust from the sweeps).
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = ZERO;
        }
    }
    Ok(SchurForm { q, t })
}

/// Swap the adjacent diagonal entries (i, i+1) of the triangular factor by a
/// unitary similarity, updating q accordingly.
fn swap_adjacent(t: &mut CMatrix, q: &mut CMatrix, i: usize) {
    let n = t.nrows();
    let a = t[(i, i)];
    let b = t[(i, i + 1)];
    let d = t[(i + 1, i + 1)];
    // Eigenvector of [[a, b], [0, d]] for eigenvalue d.
    let v1 = b;
    let v2 = d - a;
    if v1.norm() == 0.0 && v2.norm() == 0.0 {
        return;
    }
    let (c, s) = givens(v1, v2);
    rot_rows(t, i, c, s, 0..n);
    rot_cols(t, i, c, s, 0..n);
    rot_cols(q, i, c, s, 0..n);
    t[(i + 1, i)] = ZERO;
    t[(i, i)] = d;
    t[(i + 1, i + 1)] = a;
}

/// Reorder the Schur form so that the eigenvalues with `select[k] == true`
/// occupy the leading block. Returns the number selected; the first `k`
/// columns of `q` then form an orthonormal basis of the corresponding
/// invariant subspace.
pub fn schur_reorder(form: &mut SchurForm, select: &[bool]) -> usize {
    let n = form.t.nrows();
    assert_eq!(select.len(), n, "selection length must match dimension");
    let mut sel: Vec<bool> = select.to_vec();
    let total = sel.iter().filter(|&&b| b).count();
    let mut target = 0usize;
    while target < total {
        // First selected position at or after `target`.
        let mut p = target;
        while !sel[p] {
            p += 1;
        }
        for j in (target..p).rev() {
            swap_adjacent(&mut form.t, &mut form.q, j);
            sel.swap(j, j + 1);
        }
        target += 1;
    }
    total
}

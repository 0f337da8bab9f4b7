use crate::SpectralError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix, row-major construction, the universal currency for
/// symbols, bases and projections.
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn is_finite_matrix(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Build a matrix from row-major complex entries, rejecting NaN/Inf.
pub fn cmat_from_rows(
    rows: usize,
    cols: usize,
    entries: &[Complex64],
) -> Result<CMatrix, SpectralError> {
    if entries.len() != rows * cols {
        return Err(SpectralError::DimensionMismatch(format!(
            "expected {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = CMatrix::from_row_slice(rows, cols, entries);
    if !is_finite_matrix(&m) {
        return Err(SpectralError::NonFinite);
    }
    Ok(m)
}

pub fn cmat_from_real_rows(
    rows: usize,
    cols: usize,
    entries: &[f64],
) -> Result<CMatrix, SpectralError> {
    let z: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    cmat_from_rows(rows, cols, &z)
}

pub fn cvec_from_real(entries: &[f64]) -> CVector {
    CVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| Complex64::new(x, 0.0)),
    )
}

/// Operator 2-norm (largest singular value).
pub fn opnorm2(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0f64, f64::max)
}

/// Multiply each row by a unit phase so its largest entry is real positive.
/// Keeps bases deterministic and real whenever the underlying data is real.
pub fn normalize_row_phases(m: &mut CMatrix) {
    for i in 0..m.nrows() {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for j in 0..m.ncols() {
            let mag = m[(i, j)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = j;
            }
        }
        if best_mag > 0.0 {
            let phase = m[(i, best)] / Complex64::new(best_mag, 0.0);
            let inv = phase.conj();
            for j in 0..m.ncols() {
                m[(i, j)] *= inv;
            }
        }
    }
}

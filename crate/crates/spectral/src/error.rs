use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("QR iteration failed to converge after {0} sweeps")]
    NumericalFailure(usize),
    #[error("eigenvalue within {tol:.3e} of the imaginary axis (min |Re| = {gap:.3e})")]
    GlancingOrCharacteristic { gap: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is rank deficient (sigma_min/sigma_max = {0:.3e})")]
    RankDeficient(f64),
    #[error("vector is not in the stable subspace (residual {0:.3e})")]
    NotInStableSubspace(f64),
    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),
}

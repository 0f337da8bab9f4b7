use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Spectral(#[from] hyplab_spectral::SpectralError),
    #[error("syntax error at byte {offset}: {msg}")]
    SyntaxError { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("expression evaluation failed: {0}")]
    EvalError(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("model invariant violated: {check}")]
    InvariantViolation { check: String },
    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),
    #[error("boundary matrix A_d is singular at the base state")]
    SingularAd,
    #[error("zero frequency not allowed here")]
    ZeroFrequency,
    #[error("characteristic boundary: A_d has an eigenvalue on the imaginary axis")]
    CharacteristicBoundary,
    #[error("transversality failure: {0}")]
    TransversalityFailure(String),
    #[error("frequency clusters not separated (rho too large): {0}")]
    ClustersNotSeparated(String),
    #[error("contraction iteration diverged: {0}")]
    ContractionDiverged(String),
    #[error("H(zeta) is singular")]
    SingularH,
    #[error("tangential system is not evolutionary")]
    NotEvolutionary,
    #[error("enlarged system not evolutionary at the frozen point: {0}")]
    NotEvolutionaryAtPoint(String),
    #[error("E_+ limit could not be extrapolated at gamma = 0: {0}")]
    GlancingLimitFailure(String),
    #[error("rank condition fails at this frequency")]
    RankConditionFails,
    #[error("wrong shape: {0}")]
    WrongShape(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("nonlinear solve diverged: {0}")]
    NonlinearSolveDiverged(String),
    #[error("A_d(u) lost positivity along the run: {0}")]
    AdNotPositive(String),
    #[error("support reached the outflow boundary")]
    SupportReachedOutflow,
    #[error("trace is not in the stable subspace (residual {0:.3e})")]
    TraceNotInStableSubspace(f64),
    #[error("solvability residual too large: {0:.3e}")]
    SolvabilityResidualLarge(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

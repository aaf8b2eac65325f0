use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),
    #[error("near resonance: (n/b)chi = {value} is within {gap:.3e} of Landau level {level}")]
    NearResonance { value: f64, level: usize, gap: f64 },
    #[error("right-hand side lies in the kernel spanned by psi0")]
    InKernel,
    #[error("series not converged: {0}")]
    SeriesNotConverged(String),
    #[error("grid refinement failed: |beta_N - beta_N'| = {0:.3e}")]
    Refinement(f64),
    #[error("constraint violated: residual {0:.3e}")]
    ConstraintViolation(f64),
    #[error("branch failure after {iterations} iterations, last residual {residual:.3e}")]
    BranchFailure { iterations: usize, residual: f64 },
    #[error("no bifurcating solution: sign(chi - b) must equal sign(g - 1), got chi - b = {chi_minus_b}, g - 1 = {g_minus_one}")]
    NoSolution { chi_minus_b: f64, g_minus_one: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

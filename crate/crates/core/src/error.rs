use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} is outside a chain of length {len}")]
    SupportOutOfRange { site: usize, len: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("basis mismatch: {left} vs {right}")]
    BasisMismatch { left: String, right: String },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("symmetry violated: {symmetry} residual {residual:.3e}")]
    SymmetryViolation { symmetry: String, residual: f64 },

    #[error("parity-odd fermion term rejected: {0}")]
    OddFermionTerm(String),

    #[error("term range {range} incompatible with {detail}")]
    RangeViolation { range: usize, detail: String },

    #[error("supports overlap at site {0}")]
    OverlappingSupports(usize),

    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("estimated peak memory {needed} bytes exceeds the cap {cap} bytes")]
    ResourceCap { needed: u64, cap: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("time step underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

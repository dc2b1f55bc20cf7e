use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped loosely by the module that raises them; the CLI maps
/// them onto exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("reduction polynomial {0:?} is reducible over GF(p)")]
    Reducible(Vec<u32>),
    #[error("field order {0} exceeds 2^16")]
    TooLarge(u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("direction vectors are linearly dependent")]
    DependentDirections,
    #[error("enumeration of {needed} items exceeds the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("ambient spaces differ")]
    AmbientMismatch,
    #[error("samples are not consistent with a degree-{0} polynomial")]
    Inconsistent(usize),
    #[error("samples do not determine a unique polynomial")]
    Underdetermined,
    #[error("subspace is not contained in the chart subspace")]
    NotContained,
    #[error("mixture weights invalid: {0}")]
    WeightMismatch(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("missing table entry for {0}")]
    MissingEntry(String),
    #[error("entry {0} violates the degree bound")]
    DegreeViolation(String),
    #[error("invalid test spec: {0}")]
    SpecInvalid(String),
    #[error("conditional family empty too often ({0:.4} of draws)")]
    EmptyConditional(f64),
    #[error("function is not correctable: {0}")]
    NotCorrectable(String),
    #[error("degree {d} too high for GF({q}): need d + 2 <= q and d + 1 < p")]
    DegreeTooHigh { d: usize, q: u32 },
    #[error("no candidate point passed the decoder filters")]
    NoCandidate,
    #[error("parameters out of range: {0}")]
    OutOfRange(String),
    #[error("eigensolver did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("graph is not bi-regular")]
    NotBiRegular,
    #[error("graph violates the constant co-degree hypothesis")]
    CoDegreeViolated,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 validation, 3 cap exceeded, 4 no candidate or
    /// non-convergence, 1 anything else (I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded { .. } => 3,
            Error::NoCandidate | Error::NoConvergence(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Fails with `CapExceeded` when `needed > cap`.
pub(crate) fn check_cap(needed: u128, cap: u128) -> Result<()> {
    if needed > cap {
        Err(Error::CapExceeded { needed, cap })
    } else {
        Ok(())
    }
}

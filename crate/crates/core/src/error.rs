use thiserror::Error;

pub type Result<T, E = SpinError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpinError {
    #[error("state norm deviates from 1 by {deviation:e}")]
    NormViolation { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{spins} spins exceed the dense-matrix capacity of {max}")]
    CapacityExceeded { spins: usize, max: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid dimension {0}: must be a power of two >= 2")]
    InvalidDimension(usize),

    #[error("effective precession frequency is zero (Omega = omega_1 = 0)")]
    DegenerateDelta,

    #[error("rotation axis has norm {norm}, expected 1")]
    NonUnitAxis { norm: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("Hamiltonian sample at t = {t:e} s is not Hermitian (max deviation {deviation:e})")]
    NonHermitianSample { t: f64, deviation: f64 },

    #[error("Larmor frequency is zero")]
    ZeroField,

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("integration step too large: norm drift {drift:e} exceeds {limit:e}")]
    StepTooLarge { drift: f64, limit: f64 },

    #[error("sample rate {rate:e} Hz is below the Nyquist requirement {required:e} Hz")]
    NyquistViolation { rate: f64, required: f64 },

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

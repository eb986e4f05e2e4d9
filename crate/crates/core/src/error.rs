use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("hamiltonian is not Hermitian: max |H - H^dagger| = {max_deviation:e} exceeds {tolerance:e}")]
    NotHermitian { max_deviation: f64, tolerance: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("L_mixed(z) has a pole at z = -gamma_c = {gamma_c}")]
    Pole { gamma_c: f64 },

    #[error("quadratic pencil is degenerate for gamma_c = 0; use the non-Hermitian generator directly")]
    DegeneratePencil,

    #[error("extended matrix is not safely diagonalizable (eigenvector condition number {condition:e}); clustered eigenvalues: {clustered:?}")]
    DefectiveSpectrum {
        condition: f64,
        clustered: Vec<Complex64>,
    },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("propagation failed at step {step} (t = {time}): {violation}")]
    Propagation {
        step: usize,
        time: f64,
        violation: String,
    },

    #[error("trace {trace:e} is below the normalization threshold")]
    VanishedTrace { trace: f64 },

    #[error("matrix has eigenvalue {min_eigenvalue:e} below the positivity tolerance")]
    NotPositive { min_eigenvalue: f64 },

    #[error("channel '{label}' is not an elementary jump |b><a|")]
    UnsupportedChannel { label: String },

    #[error("Liouville dimension {dim} exceeds the configured cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

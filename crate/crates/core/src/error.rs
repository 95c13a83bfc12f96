use thiserror::Error;

/// Errors raised by the synchronization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative coupling {value} at ({row}, {col})")]
    NegativeCoupling { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected {expected}")]
    RowSum { row: usize, sum: f64, expected: f64 },

    #[error("interconnection is not connected")]
    NotConnected,

    #[error("Γ - 1rᵀ is not Hurwitz (max real part {max_real})")]
    NotHurwitz { max_real: f64 },

    #[error("Λ - 1rᵀ is not Schur (spectral radius {radius})")]
    NotSchur { radius: f64 },

    #[error("Lyapunov residual {0} exceeds tolerance")]
    LyapunovResidual(f64),

    #[error("time {t} outside domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("A({k}) is singular; backward transition undefined")]
    SingularStep { k: i64 },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("window length must be positive, got {0}")]
    BadWindow(f64),

    #[error("sample {index} = {value} outside [0, 1]")]
    Range { index: usize, value: f64 },

    #[error("|Q| = {norm} exceeds 1 at t = {t}")]
    NormBall { t: f64, norm: f64 },

    #[error("Q is not symmetric positive semi-definite at t = {t} (min eigenvalue {min_eig}, asymmetry {asym})")]
    NotSpsd { t: f64, min_eig: f64, asym: f64 },

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("switching time {0} is not representable")]
    HorizonOverflow(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl SyncError {
    /// True for errors that come from malformed input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SyncError::Shape(_)
                | SyncError::NegativeCoupling { .. }
                | SyncError::RowSum { .. }
                | SyncError::NonPositive { .. }
                | SyncError::BadWindow(_)
                | SyncError::Range { .. }
                | SyncError::Parse(_)
                | SyncError::Io(_)
                | SyncError::Unsupported(_)
                | SyncError::NotConnected
        )
    }
}

impl From<std::io::Error> for SyncError {
    fn from(e: std::io::Error) -> Self {
        SyncError::Io(e.to_string())
    }
}

impl From<csv::Error> for SyncError {
    fn from(e: csv::Error) -> Self {
        SyncError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SyncError>;

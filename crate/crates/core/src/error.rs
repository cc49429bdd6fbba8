use thiserror::Error;

/// Errors raised by the DiPCA routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DipcaError {
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    /// ‖c‖₂ vanished: w annihilates every kernel quadratic form.
    #[error("degenerate direction: ||c|| = {norm:e} (w is null for every kernel quadratic form)")]
    DegenerateDirection { norm: f64 },

    /// ‖Y_β w‖₂ vanished during a power step.
    #[error("degenerate direction: ||Y_beta w|| = {norm:e} (zero power-step direction)")]
    ZeroDirection { norm: f64 },

    #[error("constraint Jacobian is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("not a fixed point: KKT residual {residual:e} exceeds {gate:e}")]
    NotAFixedPoint { residual: f64, gate: f64 },

    #[error("score vector has vanishing energy (t't = {energy:e})")]
    ZeroScore { energy: f64 },

    #[error("component count {k} out of range 1..={max}")]
    ComponentOutOfRange { k: usize, max: usize },

    #[error("brute-force oracle limited to m <= 6 and s <= 3 (got m = {m}, s = {s})")]
    SizeGuard { m: usize, s: usize },

    #[error("no stable AR draw found after {attempts} attempts")]
    UnstableAr { attempts: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DipcaError {
    fn from(e: std::io::Error) -> Self {
        DipcaError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DipcaError {
    fn from(e: serde_json::Error) -> Self {
        DipcaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DipcaError>;

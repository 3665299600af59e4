use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("row {row} sums to 1 {deviation:+e}")]
    RowSumViolation { row: usize, deviation: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("matrix does not leave the distribution invariant (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("chain is reducible: state {state} cannot reach or be reached from state 0")]
    Reducible { state: usize },

    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },

    #[error("stationary solve failed (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("mapping is not a bijection on 0..{n}: {detail}")]
    NotBijection { n: usize, detail: String },

    #[error("mapping is not an involution: psi({x}) = {y} but psi({y}) = {back}")]
    NotInvolution { x: usize, y: usize, back: usize },

    #[error("states {x} and {y} are not equi-probable (gap {gap:e})")]
    NotEquiProbability { x: usize, y: usize, gap: f64 },

    #[error("matrix is not reversible (max detailed-balance violation {violation:e})")]
    NotReversible { violation: f64 },

    #[error("Dobrushin ratio is undefined: the two matrices coincide")]
    ZeroDenominator,

    #[error("mixing weight {0} is outside [0, 1]")]
    InvalidMixWeight(f64),

    #[error("projection schedule is empty")]
    EmptySchedule,

    #[error("trace {trace} is outside [0, 1)")]
    TraceOutOfRange { trace: f64 },

    #[error("stationary distribution is not uniform")]
    NotUniform,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("state space of size {n} exceeds the limit {max} for this operation")]
    TooLarge { n: usize, max: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("function is not centred: pi(f) = {mean:e}")]
    NotCentered { mean: f64 },

    #[error("no convergence within the step budget of {budget}")]
    BudgetExceeded { budget: usize },

    #[error("proposal support graph is disconnected")]
    Disconnected,

    #[error("enumeration would produce {count} involutions, cap is {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } => ErrorKind::Parse,
            Error::NoConvergence { .. }
            | Error::BudgetExceeded { .. }
            | Error::Singular
            | Error::Io(_) => ErrorKind::Runtime,
            _ => ErrorKind::Validation,
        }
    }
}

/// See [`Error::kind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Validation,
    Runtime,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("Verblunsky coefficient outside the open unit disk: |alpha| = {0}")]
    NotInDisk(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("matrix is not in SU(1,1): {0}")]
    NotSu11(String),
    #[error("generator is not elliptic: t^2 - |z|^2 = {0}")]
    NotElliptic(f64),
    #[error("iteration count {got} below minimum {min}")]
    TooFewIterations { got: usize, min: usize },
    #[error("bracket [{lo}, {hi}] does not straddle target {target}")]
    Bracket { lo: f64, hi: f64, target: f64 },
    #[error("truncation size must be even and at least 8, got {0}")]
    TruncationSize(usize),
    #[error("boundary phase must be unimodular, |phase| = {0}")]
    BoundaryPhase(f64),
    #[error("coin at site {site}: {reason}")]
    Coin { site: i64, reason: String },
    #[error("state support reaches the window boundary")]
    WindowBoundary,
    #[error("wrong model kind: {0}")]
    WrongKind(&'static str),
    #[error("too few points for a fit: {0}")]
    TooFewPoints(usize),
    #[error("degenerate coefficient: {0}")]
    Degenerate(String),
    #[error("config error at line {line}, column {column}: {msg}")]
    Config { line: usize, column: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

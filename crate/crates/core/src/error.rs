use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} factors, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("stabilizer generators must have real phase, got {0}")]
    ImaginaryPhase(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid distance {0}: must be odd and at least 3")]
    InvalidDistance(usize),
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: usize },
    #[error("cell {0} has a lost face and must be merged before its product is read")]
    MustMerge(usize),
    #[error("no perfect matching exists for {0} events without boundary nodes")]
    Infeasible(usize),
    #[error("extrapolation requires b < a, got a={a}, b={b}")]
    NonSuppressing { a: f64, b: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

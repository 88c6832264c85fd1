use thiserror::Error;

/// Errors raised by the solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hysteresis half-width must be positive and finite, got {0}")]
    InvalidWidth(f64),

    #[error("state ({u}, {w}) lies outside the strip |u - w| <= {a}")]
    OutsideStrip { u: f64, w: f64, a: f64 },

    #[error("initial data violates the strip condition in cell {cell} (x = {x})")]
    InitialStrip { cell: usize, x: f64 },

    #[error("empty or reversed interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },

    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("{0}")]
    Precondition(String),

    #[error("unknown flux id '{0}'")]
    UnknownFlux(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time step is degenerate: {0}")]
    DegenerateStep(String),

    #[error("strip violated after step {step} in cell {cell}: |u - w| = {gap}")]
    StripBroken { step: usize, cell: usize, gap: f64 },

    #[error("waves reached the domain boundary at step {0}")]
    BoundaryTouched(usize),

    #[error("grids of the compared runs differ")]
    GridMismatch,

    #[error("step report carries no interface traces")]
    MissingTraces,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

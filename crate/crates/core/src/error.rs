use thiserror::Error;

/// Errors raised by measure construction, metric evaluation and transport solves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("image has no positive pixel")]
    AllZeroImage,

    #[error("negative or non-finite pixel {value} at ({row}, {col})")]
    NegativePixel { row: usize, col: usize, value: f64 },

    #[error("image is not square: {rows} rows x {cols} columns")]
    NonSquare { rows: usize, cols: usize },

    #[error("color images are not supported ({0})")]
    ColorUnsupported(String),

    #[error("malformed image data: {0}")]
    Format(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("measure has zero mass")]
    ZeroMass,

    #[error("dilation factor must be positive and finite, got {0}")]
    NonPositiveGamma(f64),

    #[error("oversampling factor must be at least 1")]
    OversampleZero,

    #[error("measures live on different grids (dim {dim_a} N={n_a} vs dim {dim_b} N={n_b})")]
    GridMismatch {
        dim_a: usize,
        n_a: usize,
        dim_b: usize,
        n_b: usize,
    },

    #[error("masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("metric parameters are infeasible for this pair: margin {margin} (matched moment order {order})")]
    InfeasibleParams { margin: f64, order: i32 },

    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),

    #[error("centers differ by {0}; the bound requires equal centers")]
    CentersDiffer(f64),

    #[error("transport problem too large: {sources} x {targets} exceeds guard {guard}")]
    TooLarge {
        sources: usize,
        targets: usize,
        guard: usize,
    },

    #[error("transport solver failed: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors that report a violated metric hypothesis (mass, centers,
    /// feasibility) rather than malformed input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::MassMismatch(..)
                | Error::InfeasibleParams { .. }
                | Error::CentersDiffer(_)
                | Error::TooLarge { .. }
                | Error::ZeroMass
        )
    }
}

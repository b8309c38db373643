use thiserror::Error;

use crate::spectral::Repr;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("expected a field in {expected} representation, found {found}")]
    Representation { expected: Repr, found: Repr },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "grid (n = {n}, period = {period}) is not cone-adequate for level {level}: \
         need period >= {required_period} and n >= {required_n}"
    )]
    NotConeAdequate {
        level: u32,
        n: usize,
        period: f64,
        required_period: f64,
        required_n: usize,
    },

    #[error("grid too large for a brute-force oracle: n = {n}, limit is {limit}")]
    GridTooLarge { n: usize, limit: usize },

    #[error("regions overlap at lattice wavenumber ({0}, {1})")]
    RegionOverlap(i64, i64),

    #[error("probe spacing {spacing} is coarser than the required {limit}")]
    ProbeTooCoarse { spacing: f64, limit: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

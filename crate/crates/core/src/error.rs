use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series `{name}` is invalid: {reason}")]
    InvalidSeries { name: String, reason: String },

    #[error("series `{series}` does not overlap the common index range")]
    Alignment { series: String },

    #[error("series `{0}` not found in dataset")]
    MissingSeries(String),

    #[error("degenerate split: {in_sample} in-sample and {out_of_sample} out-of-sample points")]
    DegenerateSplit {
        in_sample: usize,
        out_of_sample: usize,
    },

    #[error("lag {lag} for `{variable}` requires more than {len} observations")]
    LagTooLarge {
        variable: String,
        lag: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("split index {index} outside 1..={max}")]
    SplitIndexOutOfRange { index: usize, max: usize },

    #[error("actual value at position {index} is zero; MAPE is undefined")]
    ZeroActual { index: usize },

    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    #[error("linear system is singular: {0}")]
    Singular(String),
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidParameter(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;

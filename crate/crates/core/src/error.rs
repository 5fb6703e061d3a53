use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs violate a documented precondition (shapes, index sets, ...).
    #[error("contract violation: {0}")]
    Contract(String),
    /// The design matrix is (numerically) rank deficient; `column` is the
    /// first column lying in the span of the columns before it.
    #[error("design is rank deficient at column {column}")]
    RankDeficient { column: usize },
    /// Non-finite value found in the input data.
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::Error::Contract(alloc::format!($($arg)*))
    };
}

macro_rules! domain {
    ($($arg:tt)*) => {
        $crate::Error::Domain(alloc::format!($($arg)*))
    };
}

pub(crate) use contract;
pub(crate) use domain;

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report. Each variant maps to a stable
/// category string used in CLI error lines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("category {0} has no observed samples")]
    EmptyCategory(String),

    #[error("draw budget of {max_draws} exhausted; unfilled categories: {}", unfilled.join(", "))]
    BudgetExhausted {
        max_draws: u64,
        unfilled: Vec<String>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::RankDeficient(_) => "rank-deficiency",
            Error::EmptyData(_) => "empty-data",
            Error::EmptyCategory(_) => "empty-category",
            Error::BudgetExhausted { .. } => "budget-exhausted",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("transition matrix is reducible: state {to} is not reachable from state {from}")]
    Reducible { from: usize, to: usize },

    #[error("transition matrix is irreducible but periodic with period {period}")]
    Periodic { period: usize },

    #[error("invalid shift definition: {0}")]
    InvalidShift(String),

    #[error("cocycle is not centered: sum p_a h(a) = {sum:e}")]
    NotCentered { sum: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size guard exceeded: {what} needs {needed} cells, limit is {limit}")]
    SizeGuard {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("y-window would grow beyond {limit} symbols; use a smaller horizon")]
    WindowGuard { limit: usize },

    #[error("invalid limit-process parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

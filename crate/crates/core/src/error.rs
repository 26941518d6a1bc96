use std::io;

use thiserror::Error;

/// Errors produced by the recovery library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value {value} outside the source interval [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("sequence of length {len} is too short for block order {order}")]
    InsufficientData { len: usize, order: usize },

    #[error("cannot marginalize a distribution of order {0}")]
    CannotMarginalize(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("problem too large: {what} needs {size} entries (limit {limit})")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("sweep cell rate={rate} eps_w={eps_w}, trial seed {seed}: {source}")]
    Trial {
        rate: f64,
        eps_w: f64,
        seed: u64,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

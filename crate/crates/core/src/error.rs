use std::path::PathBuf;

use thiserror::Error;

use crate::netlist::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("op code {0} out of range 0..=15")]
    OpCodeRange(u64),

    #[error("invalid input: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("invalid dimensions: {0}")]
    Dimensions(String),

    #[error("input length {got} does not match expected width {expected}")]
    Width { expected: usize, got: usize },

    #[error("ill-formed input bits: {0}")]
    IllFormed(String),

    #[error("value error: {0}")]
    Value(String),

    #[error("threshold {0} outside [0, 1]")]
    KappaRange(String),

    #[error("fair mode requires at least one sensitive categorical feature")]
    NoSensitiveFeature,

    #[error("instance too large for exhaustive enumeration: {0}² pairs exceed the 10^8 guard")]
    TooLarge(u128),

    #[error("solver executable `{}` not found", .0.display())]
    SolverNotFound(PathBuf),

    #[error("could not parse solver output: {0}")]
    SolverOutput(String),

    #[error("internal consistency failure (encoding bug): {0}")]
    Consistency(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{0}")]
    Usage(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

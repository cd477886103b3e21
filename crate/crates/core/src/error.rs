use thiserror::Error;

use crate::solver::RunReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("grid function must have at least {min} points, got {found}")]
    TooFewPoints { min: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("operator evaluation failed at sample {sample}: {source}")]
    Evaluation {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("iteration diverged{} with ‖u‖ = {norm}", fmt_iteration(*.iteration))]
    Diverged {
        iteration: Option<usize>,
        norm: f64,
        partial: Option<Box<RunReport>>,
    },

    #[error("no convergence after {iterations} iterations (a = {a}, residual = {residual:e})")]
    NonConvergence {
        a: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("regularized path failed at index {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular linear system in Newton step (a = {a})")]
    Singular { a: f64 },
}

fn fmt_iteration(iteration: Option<usize>) -> String {
    match iteration {
        Some(n) => format!(" at iteration {n}"),
        None => String::new(),
    }
}

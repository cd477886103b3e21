//! Derivative-free iterative regularization for ill-posed equations `F(u) = f`
//! with a locally σ-inverse monotone operator `F` and noisy data `f_δ`.
//!
//! The iteration is
//!
//! ```text
//! u_{n+1} = u_n - γ_n [F(u_n) + a_n (u_n - ū) - f_δ]
//! ```
//!
//! with a decreasing regularization schedule `a_n = d / (c + n h)^b`, stopped by
//! the discrepancy principle `‖F(u_n) - f_δ‖ ≤ C δ^ζ`.
//!
//! Modules:
//!
//! - [`grid`]: grid functions on `[0, 1]` with Euclidean or trapezoid-weighted norms.
//! - [`operators`]: the operator abstraction, a diagonal selfadjoint example and
//!   sampling checks for σ-inverse monotonicity and derivatives.
//! - [`schedule`]: power-law regularization schedules and their admissibility certificates.
//! - [`solver`]: the iteration, the stopping rule, the shifted variant and the
//!   fixed-point initializer.
//! - [`oracle`]: independent solves of the regularized equation `F(V) + aV = f_δ`
//!   and checks of the inequalities along the regularization path.
//! - [`problems`]: the Nyström-discretized integral equation with `arctan³` nonlinearity.
//! - [`cli`]: config parsing and the `solve`, `table1`, `verify` commands.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
mod error;
pub mod grid;
pub mod operators;
pub mod oracle;
pub mod problems;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{inner, norm, GridFunction, NormMode, Space};
pub use operators::{
    check_sigma_inverse, derivative_finite_difference_check, make_linear_spd, BallRadius,
    DiagonalOperator, FnOperator, Operator, SigmaCheckReport,
};
pub use oracle::{
    minimal_norm_estimate, regularized_path, solve_regularized, solve_regularized_newton,
    verify_lemma_suite, LemmaOptions, LemmaRecord, LemmaReport, LemmaStatus, MinimalNormEstimate,
    RegularizedSolution,
};
pub use problems::{
    build_integral_problem, exact_solution, make_noise, IntegralProblem, NoiseModel, NoiseSpec,
};
pub use schedule::{
    gamma_max, make_power_schedule, phi, Schedule, ScheduleCertificate, ScheduleParams,
    TabulatedSchedule,
};
pub use solver::{
    check_theorem3_start, fixed_point_initializer, run, run_with_reference, step, ConvergenceClaim,
    FixedPoint, GammaRule, InitialGuess, RunReport, SolverConfig, StopReason, TraceRow,
};

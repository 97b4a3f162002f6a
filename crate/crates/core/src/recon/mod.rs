//! Reconstruction: total-variation compressive sensing and a correlation baseline.

mod correlation;
mod gradient;
mod operator;
mod tv;

pub use correlation::{correlation_raw, solve_correlation};
pub use gradient::{gradient_adjoint, gradient_apply, gradient_of, GradientField};
pub use operator::PatternOperator;
pub use tv::{solve_tv, SolverSettings, TvNorm, TvProblem, TvSolution};

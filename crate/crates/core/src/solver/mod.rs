//! Nonlinear programming contract and a primal-dual interior-point solver.
//!
//! Problems implement [`NlpProblem`] (an IPOPT-style callback interface with
//! sparse first and second derivatives). Any type implementing [`Solver`]
//! can be plugged in; [`InteriorPoint`] is the bundled implementation.

mod check;
mod ipm;
mod kkt;
pub mod ldl;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use check::{check_jacobian, DerivativeError, DerivativeReport};
pub use ipm::InteriorPoint;

/// Smooth NLP
///
/// ```text
///   min f(x)  s.t.  g_l <= g(x) <= g_u,  x_l <= x <= x_u
/// ```
///
/// Rows with `g_l == g_u` are equalities. Infinite bounds are allowed.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn variable_bounds(&self, lower: &mut [f64], upper: &mut [f64]);
    fn constraint_bounds(&self, lower: &mut [f64], upper: &mut [f64]);
    fn initial_point(&self, x: &mut [f64]);
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]);
    fn constraints(&self, x: &[f64], g: &mut [f64]);
    /// `(row, column)` pairs; fixed for the lifetime of the problem.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]);
    /// Lower-triangular `(row, column)` pairs with `row >= column`.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `obj_factor * ∇²f + Σ lambda_i ∇²g_i` on the Hessian structure.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], values: &mut [f64]);

    /// Optional elimination keys for the KKT factorization, one per variable
    /// and one per constraint row. Nodes are eliminated by ascending key;
    /// ties put variables before rows.
    fn elimination_keys(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        None
    }

    /// Human-readable name of constraint row `i`, used in diagnostics.
    fn constraint_label(&self, i: usize) -> String {
        format!("row {i}")
    }

    fn variable_label(&self, i: usize) -> String {
        format!("x[{i}]")
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Scaled overall optimality tolerance.
    pub tol: f64,
    /// Scaled constraint violation required for convergence.
    pub constr_viol_tol: f64,
    pub acceptable_tol: f64,
    pub acceptable_iter: usize,
    pub mu_init: f64,
    /// Relative relaxation applied to inequality and variable bounds.
    pub bound_relax: f64,
    pub bound_push: f64,
    /// Gradient-based scaling cap for the objective and every row.
    pub max_gradient: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            tol: 1e-8,
            constr_viol_tol: 1e-6,
            acceptable_tol: 1e-6,
            acceptable_iter: 15,
            mu_init: 0.1,
            bound_relax: 1e-8,
            bound_push: 1e-2,
            max_gradient: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SolveStatus {
    Optimal,
    /// Converged to the relaxed acceptable tolerance.
    Acceptable,
    MaxIterations,
    LineSearchFailure,
    FactorizationFailure,
    /// A callback returned a non-finite value.
    EvaluationError {
        location: String,
    },
}

impl SolveStatus {
    pub fn is_success(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Acceptable)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub inf_pr: f64,
    pub inf_du: f64,
    pub mu: f64,
    pub reg: f64,
    pub alpha_du: f64,
    pub alpha_pr: f64,
    pub ls_trials: usize,
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Constraint multipliers in the unscaled problem.
    pub lambda: Vec<f64>,
    pub objective: f64,
    /// Max-norm violation of the unscaled constraints and bounds.
    pub constraint_violation: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// A solver backend for [`NlpProblem`]s.
pub trait Solver {
    fn solve(&self, problem: &dyn NlpProblem, options: &SolverOptions) -> SolverOutcome;
}

/// Maximum violation of the bounds `lower <= values <= upper`.
pub fn bound_violation(values: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    values
        .iter()
        .zip(lower.iter().zip(upper.iter()))
        .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
        .fold(0.0, f64::max)
}

//! Finite-difference reference machinery: state and adjoint solves, the
//! cost functional, and the gradient method producing `u*`.

mod banded;
mod grid;
mod solver;

pub use banded::{fd_weights, BandedLu};
pub use grid::{FieldChannel, Grid, GridField};
pub use solver::{
    evaluate_cost, gradient_method, initial_state, reduced_gradient, solve_adjoint, solve_heat,
    solve_state, Dynamics, FdSolver, ReferenceSolution, SolverConfig,
};

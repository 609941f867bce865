//! A small exact MILP solver.
//!
//! Linear relaxations are solved with a bounded dual simplex over a
//! product-form basis inverse. Integer variables are handled by best-bound
//! branch-and-bound that warm-starts every node from its parent's basis.

mod bnb;
mod error;
mod factor;
mod problem;
mod simplex;

pub use bnb::{solve_milp, BranchRule, MilpOptions, MilpSolution, MilpStatus};
pub use error::{LpError, Result};
pub use problem::{Problem, Row, Sense, VarKind, Variable};
pub use simplex::{solve_lp, LpSolution, LpStatus};

/// Tolerance used to decide whether an integer variable is integral.
pub const INT_TOL: f64 = 1e-6;
/// Primal feasibility tolerance reported solutions are checked against.
pub const FEAS_TOL: f64 = 1e-7;

//! Dense linear algebra and linear programming kernels.

mod dense;
mod lp;
mod lu;

pub use dense::{norm_inf, DenseMatrix};
pub use lp::{lp_solve, lp_solve_with, LinearProgram, LpOptions, LpSolution, LpStatus, INFINITY_SENTINEL};
pub use lu::{lu_solve, residual_inf, LuFactors, DEFAULT_PIVOT_THRESHOLD};

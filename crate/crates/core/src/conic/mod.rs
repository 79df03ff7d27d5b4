//! Standard-form conic programs `min c^T u  s.t.  b - A u in K` and an
//! operator-splitting solver for them.

mod cones;
mod problem;
mod solver;

pub use cones::{
    project_cone, project_dual_cone, smat, svec, svec_index, svec_len, ConeBlock, ConeKind, ConeSpec,
};
pub use problem::{ConicProblem, ProblemFile, SparseMatrix, Triplets, PROBLEM_FORMAT};
pub use solver::{
    solve, solve_observed, IterateInfo, Residuals, SolverSettings, SolverSolution, SolverStatus,
};

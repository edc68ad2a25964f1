//! Standard-form cone programs and a primal-dual interior-point solver over
//! products of nonnegative, second-order and semidefinite cones.

mod cones;
mod program;
mod solver;
pub mod svec;

pub use program::{ConeBlock, ConeProgram, Diagnostic, SparseRow};
pub use solver::{solve, IterationStats, SolveResult, SolveStatus, SolverError, SolverSettings};
pub use svec::{smat, svec, svec_index, tri_len, DimensionError};

//! Small dense semidefinite programs with an affine-expression builder.

mod archive;
mod bisect;
mod expr;
mod problem;
mod solver;

pub use archive::{render as render_archive, write_archive};
pub use bisect::{bisect_gain, Feasible};
pub use expr::{AffExpr, BlockBuilder};
pub use problem::{AffineLmiConstraint, Objective, SdpProblem, Sense, SignHint, Var, VarInfo, VarKind};
pub use solver::{solve, SdpSolution, SolveStatus, SolverOptions};

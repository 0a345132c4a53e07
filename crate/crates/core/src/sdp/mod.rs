//! Semidefinite programs: the problem representation every convex fit lowers
//! to, equality elimination, and a homogeneous self-dual interior-point solver.

mod preprocess;
mod problem;
mod solver;

pub use preprocess::{preprocess, Preprocessed, RecoveryMap};
pub use problem::{
    certify, AffExpr, BlockBuilder, CertifyReport, LinearEquality, LmiBlockTemplate, SdpProblem,
};
pub use solver::{solve, InfeasibilityKind, SdpSolution, SolveStatus, SolverOptions};

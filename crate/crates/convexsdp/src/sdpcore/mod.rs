//! Block-structured semidefinite programs in LMI form and an interior-point
//! solver for them.

pub mod block;
pub mod problem;
pub mod sdpa;
pub mod solver;

pub use block::{Block, BlockMatrix, BlockSpec, BlockStructure};
pub use problem::{Residuals, SdpError, SdpProblem, SparseEntry, VarLabel};
pub use sdpa::to_sdpa_sparse;
pub use solver::{solve, IterRecord, SdpSolution, SolveOptions, SolveStatus};

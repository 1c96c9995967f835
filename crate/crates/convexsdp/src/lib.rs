//! Convex-constrained discretizations on the unit cube, compiled to
//! block-diagonal semidefinite programs and solved with an embedded
//! interior-point method.

pub mod analytic;
pub mod cli;
pub mod fdops;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod models;
pub mod sdpcore;

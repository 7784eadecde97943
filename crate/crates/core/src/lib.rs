//! Sparse recovery kernels relating the noise-constrained l1 problem
//!
//! ```text
//! (LPn)  min ||u||_1   subject to ||Au - b||_2 <= delta
//! ```
//!
//! to the l1-penalized least-squares problem
//!
//! ```text
//! (QP)   min 1/2 ||Au - b||_2^2 + beta ||u||_1
//! ```
//!
//! The crate provides certified solvers for both, analytic bounds on the
//! `beta` that makes the two coincide, the closed-form equality relation on a
//! known support, a dual-function scan that identifies that `beta`
//! numerically, and the seeded trial protocol tying all of it together.
//!
//! Everything here is `no_std` (with `alloc`); file formats, the command line
//! and parallel trial execution live in the `betadelta` crate.

#![no_std]
// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod duality;
mod error;
pub mod experiment;
pub mod linalg;
pub mod lpn;
pub mod problem;
pub mod qp;
pub mod solution;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use problem::SensingProblem;
pub use solution::{SignVector, SparseSolution};

//! Command line front end for `betadelta-core`: problem files, sweep CSV
//! reports and a parallel experiment runner.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod format;
pub mod report;

pub use cli::{main_with_args, run, Cli};
pub use error::CliError;

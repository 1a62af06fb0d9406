//! Hamilton-Jacobi reachability for safe navigation in a-priori unknown
//! environments.
//!
//! The crate computes backward reachable sets over a state grid while the
//! environment is being discovered, keeps them current with warm-started and
//! queue-local value updates, and wraps an arbitrary planner in a
//! least-restrictive safety filter. See the `examples/` directory for one
//! runnable walkthrough per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod brs;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod grid;
pub mod hji;
pub mod plan;
pub mod plot;
pub mod safety;
pub mod sdf;
pub mod sim;

pub use error::{Error, Result};

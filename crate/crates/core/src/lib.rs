//! Variational generalized Nash equilibria of aggregative games with
//! linear coupled constraints.
//!
//! The crate has two routes to the same equilibrium:
//!
//! * [`dynamics::simulate`] integrates a distributed seeking algorithm in
//!   which every agent only talks to its current neighbours, tracking the
//!   aggregate and the shared multiplier with sign-based consensus;
//! * [`oracle::solve_extragradient`] solves the centralized KKT system by a
//!   projected extragradient method.
//!
//! [`geometry`] provides the merit functions used to monitor convergence,
//! and [`network`] the graph schedules.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod fd;
pub mod game;
pub mod geometry;
mod io;
pub mod network;
pub mod oracle;

pub use error::{Error, Result};

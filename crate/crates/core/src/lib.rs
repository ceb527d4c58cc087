//! Game-theoretic uplink power control for cells shared by cellular users and
//! device-to-device (D2D) links.
//!
//! - [`model`]: path gains, interference and SINR.
//! - [`game`]: utilities, the unpriced and priced update rules, the
//!   synchronous iteration engine and Nash-equilibrium checks.
//! - [`analysis`]: standard-interference-function and Jacobian checks.
//! - [`baselines`]: CDPC, Koskie–Gajic and the rule registry.
//! - [`experiments`]: scenario generation, metrics, sweeps and comparisons.
//! - [`cli`]: configuration parsing and the `run`/`sweep`/`compare`/`check` commands.

// `!(a < b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod game;
pub mod model;

pub use error::{Error, Result};

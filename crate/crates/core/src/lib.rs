//! Maximum-consensus robust fitting driven by influences of monotone Boolean
//! functions.
//!
//! Every subset of a dataset is a vertex of the Boolean cube, and the map
//! "subset → does a model fit it within ε" is a monotone Boolean function.
//! The largest consensus set is the maximum upper zero of that function. The
//! greedy solver in [`maxcon`] repeatedly drops the basis point with the
//! largest estimated influence until the remainder is feasible, then grows
//! the result back to an upper zero.
//!
//! Module map:
//! - [`model`]: datasets, residuals and synthetic generators.
//! - [`feasibility`]: exact L∞ solves, bases and the feasibility oracle.
//! - [`boolean`]: influences (exact, sampled, closed form), ideal functions
//!   and upper-zero search.
//! - [`maxcon`]: the greedy solver, its ablation variants and RANSAC baselines.
//! - [`bench`]: seeded experiment drivers and report aggregation.
//! - [`config`]: run configuration resolution for the CLI.

pub mod bench;
pub mod boolean;
pub mod config;
pub mod error;
pub mod feasibility;
mod linalg;
pub mod mask;
pub mod maxcon;
pub mod model;
pub mod seed;

pub use error::{Error, Result};
pub use mask::SubsetMask;

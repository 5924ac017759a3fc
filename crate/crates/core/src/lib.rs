//! Simulation kernels for critical inhomogeneous random graphs and their
//! continuum limits: rank-one graph samplers, size-biased exploration,
//! p-tree constructions with tilts and surplus edges, stick-breaking
//! continuum-tree approximations, event-exact Lévy-type path machinery,
//! mixed-Poisson branching processes, and finite metric-measure-space
//! utilities (Gromov-Hausdorff, covers, dimension regression).
//!
//! All samplers are pure functions of `(parameters, rng)`; replica-level
//! parallelism is expected to split seeds via [`rng::split_seed`].

pub mod branching;
pub mod error;
pub mod exploration;
pub mod graphgen;
pub mod icrt;
pub mod levy;
pub mod metric;
pub mod ptree;
pub mod rng;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};

//! Percolation of averages on the weighted complete graph: instances with
//! independent exponential edge weights, exact and heuristic longest-light-path
//! solvers, closed-form tail analytics, overlap combinatorics, a conditioned
//! deviation laboratory, and reproducible experiment sweeps.

pub mod analytic;
pub mod deviation;
pub mod error;
pub mod model;
pub mod overlap;
pub mod rng;
pub mod solver;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};

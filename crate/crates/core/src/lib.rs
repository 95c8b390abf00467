//! Discrete dynamic network models (DNMs) for forecasting.
//!
//! A DNM is a static belief network replicated over time slices, with
//! contemporaneous arcs inside a slice and lagged arcs between slices.
//! Nodes may carry a mixture conditional distribution that blends a
//! contemporaneous table `Q` with a lagged table `R` through a likelihood
//! weight `alpha`, re-estimated by maximum likelihood as data arrives.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command
//! line live in the `dnm-cli` crate.

#![no_std]

extern crate alloc;

pub mod carsales;
pub mod diagnostics;
pub mod dnm;
pub mod engine;
mod error;
pub mod estimation;
pub mod factor;
pub mod network;

pub use error::{Error, Result};

//! Pinning models whose disorder is an independent renewal set.

pub mod annealed;
pub mod error;
pub mod homogeneous;
pub mod moments_gaps;
pub mod quenched;
pub mod renewal_core;
pub mod runner;
pub mod special;
pub mod spectral;
pub mod stats;

pub use error::{PinningError, Result};

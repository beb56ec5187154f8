//! Active-learning reliability analysis of systems with several limit states.
//!
//! Each component limit state gets its own Kriging or PC-Kriging surrogate.
//! Subset simulation on the composed surrogate yields the failure
//! probability and a pool of candidates; a system-level deviation number,
//! density-based clustering and total Sobol' indices decide which component
//! is evaluated where.

pub mod bench;
pub mod clustering;
pub mod composition;
pub mod config;
pub mod error;
pub mod input;
pub mod learning;
pub(crate) mod linalg;
pub mod report;
pub mod sensitivity;
pub mod stats;
pub mod subset;
pub mod surrogate;

pub use error::{Error, Result};

#![cfg_attr(not(test), no_std)]

//! Failure-aware re-decision under an invariant observation.
//!
//! The crate is `no_std` with `alloc`. [`numkit`] holds the numerical kernel,
//! [`episode`] the trial loop, [`policies`] the re-decision policies,
//! [`tasks`] the synthetic task families, [`training`] behavior cloning and DQN,
//! and [`eval`] the metrics and evaluation suite.

extern crate alloc;

pub mod episode;
pub mod error;
pub mod eval;
pub mod numkit;
pub mod policies;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};

//! Numerical lab for quantum physical unclonable functions (qPUFs).
//!
//! The crate simulates Haar-random qPUFs and ε-disturbed variants, a
//! four-stage quantum emulation circuit, the standard test algorithms used by
//! verifiers, the unforgeability games, and a set of concrete adversaries.

pub mod adversaries;
pub mod emulator;
pub mod error;
pub mod games;
pub mod numerics;
pub mod qpuf;
pub mod rng;
pub mod testers;
pub mod verify;

pub use error::{Error, Result};

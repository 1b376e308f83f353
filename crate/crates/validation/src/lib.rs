//! Reference oracles and fixtures for the acceptance suite.
//!
//! The code is shared with the core crate's integration tests, which
//! include the same module directly.

#[path = "../../core/tests/common/mod.rs"]
mod common;

pub use common::*;

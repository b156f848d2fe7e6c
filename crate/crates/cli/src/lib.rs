//! Command line and local HTTP service for the `pdlab` toolkit.
//!
//! Both surfaces call the same functions in [`ops`], so a CLI run and an
//! HTTP request with identical parameters produce identical images.

pub mod cli;
pub mod ops;
pub mod server;
pub mod store;

pub use cli::{run, Cli};

//! Feature-clustered split neural networks for tabular data with missing
//! values.

pub mod cli;
pub mod cluster;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};

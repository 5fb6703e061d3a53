//! Experiment harness, CSV ingestion and command-line front end for
//! conditional marginal screening (`csis-core`).

pub mod cli;
pub mod config;
pub mod csv_io;
mod error;
pub mod harness;
pub mod report;

pub use error::{Error, Result};

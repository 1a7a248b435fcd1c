//! Two-stage fall event classification: a binary fall detector screens
//! incoming skeleton feature vectors, and a five-class fall-type model
//! refines everything the detector flags as a fall or leaves uncertain.
//!
//! The crate is self-contained: data preprocessing, label cleaning, the
//! neural network engine, cascade training and evaluation all live here,
//! behind the `fall-cascade` command line tool.

pub mod cascade;
pub mod cleaning;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod net;
pub mod seed;

pub use error::{Error, Result};

/// Command line entry point; returns the process exit code.
pub fn run() -> i32 {
    cli::run()
}

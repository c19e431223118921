//! File formats, the review service and the `ipikit` command line, on top of
//! the `ipikit-core` algorithms.

pub mod cli;
pub mod error;
pub mod io;
pub mod report;
pub mod service;

pub use error::{Error, Result};

//! File formats, parallel experiment drivers and the `qticket` command line.

pub mod cli;
pub mod delta;
pub mod error;
pub mod exec;
pub mod format;
pub mod ini;
pub mod output;

pub use error::{Error, Result};

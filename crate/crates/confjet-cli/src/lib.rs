//! JSON formats, metric spec loading and the `confjet` command line.

pub mod cli;
pub mod format;
pub mod input;

pub use cli::{run, Outcome, EXIT_BEYOND, EXIT_INVALID, EXIT_OK};

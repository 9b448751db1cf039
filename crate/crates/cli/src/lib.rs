//! Experiment harness behind the `semalloc` binary.

use std::fmt;

pub mod experiments;
pub mod grid;

/// Caller error (bad flags or a problem the command cannot accept). The
/// binary exits with status 2 for these.
#[derive(Debug, Clone, PartialEq)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for Usage {}

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SEMALLOC_THREADS";

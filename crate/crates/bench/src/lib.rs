//! Library side of the `srbench` command: gradient checks, cost tables,
//! latency sweeps and golden files over the blocks in [`srblock`].

pub mod bench;
pub mod cases;
pub mod costs;
pub mod golden;
pub mod gradcheck;

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A problem with how the command was invoked (bad config, missing input)
/// rather than with the numbers. Maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit status for an error that escaped a subcommand.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

/// `SR_SEED` from the environment, if set.
pub fn seed_override() -> anyhow::Result<Option<u64>> {
    match std::env::var("SR_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("SR_SEED must be an unsigned integer, got {s:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("SR_SEED: {e}"))),
    }
}

//! Memory-constrained streaming multi-armed bandits.
//!
//! A player faces `n` Bernoulli arms arriving as a stream over `P` passes,
//! may hold at most `m` arms in memory at any time, and spends a total pull
//! budget of `T` rounds. Dropping an arm erases its identity and statistics;
//! only a merge flag distinguishes a re-arriving resident from a fresh arm.
//! The crate provides the refereed environment, the mirror-descent sampling
//! core, runners for the large-memory (`m = n-1` and `m >= 8n/9`) and
//! small-memory (`m < 8n/9`) regimes, a single-pass best-arm retention
//! routine, hard-instance generators, and a Monte-Carlo harness that
//! measures pseudo-regret scaling.
//!
//! Module layout:
//!
//! ```text
//!   mathkit      pass exponents, iterated logs, pull-budget schedules
//!   instances    instance descriptions, hard families, gap schedules
//!   streamenv    the referee: stream cursor, memory slots, pull budget
//!   osmd         online stochastic mirror descent + find-best sampling
//!   algos_large  multi-pass runners for m = n-1 and m >= 8n/9
//!   algos_small  multi-pass runner for m < 8n/9 with a level-based
//!                best-arm identification engine
//!   bar          single-pass best-arm retention
//!   harness      seeded experiment batteries, CSV/JSON artifacts, fuzzing
//!   plot         dependency-free log-log SVG rendering
//!   cli          command-line front end
//! ```

pub mod algos_large;
pub mod algos_small;
pub mod bar;
pub mod cli;
pub mod harness;
pub mod instances;
pub mod mathkit;
pub mod osmd;
pub mod plot;
pub mod streamenv;

use std::fmt;

/// Crate-wide error type.
///
/// `GameOver` is not a failure: it is the referee's clean signal that the
/// pull budget is exhausted, and runners treat it as the cue to wrap up.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A mathematical argument lies outside the function's domain.
    Domain(String),
    /// A configuration is structurally invalid (sizes, ranges, regimes).
    Config(String),
    /// An API was used out of order (e.g. finishing a run early).
    Usage(String),
    /// A numeric routine failed to converge or produced a non-finite value.
    Numeric(String),
    /// An admission was attempted with all memory slots occupied.
    MemoryFull,
    /// A read was attempted after the final pass ended.
    PassExhausted,
    /// The pull budget is exhausted; the run is over.
    GameOver,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::MemoryFull => write!(f, "memory full: all slots occupied"),
            Error::PassExhausted => write!(f, "stream exhausted: no passes remain"),
            Error::GameOver => write!(f, "game over: pull budget exhausted"),
        }
    }
}

impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

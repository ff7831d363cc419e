//! Deterministic simulation of future-parallel computation DAGs under
//! parsimonious work stealing.
//!
//! The crate is split along the data flow of an experiment:
//!
//! * [`dag`] holds the graph model, structural validation, thread
//!   decomposition, classification into structured families and metrics.
//! * [`generators`] builds the adversarial DAG families (with landmark tables
//!   and replay scripts) and seeded random DAGs for property sweeps.
//! * [`sched`] runs a DAG on virtual processors and counts deviations.
//! * [`cache`] replays traces through private fully associative LRU caches.
//! * [`experiments`] wires the pieces into property checks, bound suites and the
//!   lower-bound reproductions used by the CLI.

pub mod cache;
pub mod dag;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod hash;
pub mod sched;

pub use error::{Error, Result};

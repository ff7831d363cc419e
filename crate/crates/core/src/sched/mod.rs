//! Work-stealing execution of computation DAGs on virtual processors.

mod deviation;
mod engine;
mod script;
mod trace;

use serde::{Deserialize, Serialize};

pub use deviation::{count_deviations, kind_of, DeviationKind, DeviationReport};
pub use engine::{run_parallel, run_sequential};
pub use script::{DefaultPolicy, Directive, ProcessorScript, ScheduleScript, WakeCondition};
pub use trace::{Event, ExecutionTrace, TraceEvent, TraceHeader, RNG_NAME};

/// Which child of a fork the executing processor keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForkPolicy {
    /// Run the spawned thread, push the parent's continuation.
    FutureFirst,
    /// Run the parent's continuation, push the spawned thread.
    ParentFirst,
}

impl std::str::FromStr for ForkPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "future-first" => Ok(ForkPolicy::FutureFirst),
            "parent-first" => Ok(ForkPolicy::ParentFirst),
            other => Err(format!("unknown fork policy {other:?}")),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::ExecutionTrace;
use crate::dag::{Dag, NodeId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// In-degree-2 node (touch or join).
    Touch,
    /// Child of a fork.
    ForkChild,
    /// Anything else; never expected on a valid run.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub deviations: Vec<NodeId>,
    pub count: usize,
    pub touch_deviations: usize,
    pub fork_child_deviations: usize,
    pub other_deviations: usize,
}

impl DeviationReport {
    pub fn contains(&self, node: NodeId) -> bool {
        self.deviations.binary_search(&node).is_ok()
    }

    /// Deviations at synchronization nodes, ascending.
    pub fn touch_nodes(&self, dag: &Dag) -> Vec<NodeId> {
        self.deviations
            .iter()
            .copied()
            .filter(|&n| kind_of(dag, n) == DeviationKind::Touch)
            .collect()
    }
}

pub fn kind_of(dag: &Dag, node: NodeId) -> DeviationKind {
    if dag.is_sync_node(node) {
        DeviationKind::Touch
    } else if dag.parents(node).any(|p| dag.is_fork(p)) {
        DeviationKind::ForkChild
    } else {
        DeviationKind::Other
    }
}

/// Node `v2` deviates if the processor that ran it in `par` did not run
/// `v2`'s predecessor in the sequential order immediately before it.
pub fn count_deviations(
    dag: &Dag,
    seq: &ExecutionTrace,
    par: &ExecutionTrace,
) -> Result<DeviationReport> {
    seq.check_against(dag)?;
    par.check_against(dag)?;
    if seq.processors() != 1 {
        return Err(Error::TraceMismatch(
            "sequential baseline must use one processor".into(),
        ));
    }
    let order = seq.execution_order();
    let mut previous: Vec<Option<NodeId>> = vec![None; dag.len()];
    for run in par.per_processor() {
        for pair in run.windows(2) {
            previous[pair[1].0] = Some(pair[0]);
        }
    }
    let mut deviations: Vec<NodeId> = order
        .windows(2)
        .filter(|w| previous[w[1].0] != Some(w[0]))
        .map(|w| w[1])
        .collect();
    deviations.sort();

    let (mut touch, mut fork, mut other) = (0, 0, 0);
    for &d in &deviations {
        match kind_of(dag, d) {
            DeviationKind::Touch => touch += 1,
            DeviationKind::ForkChild => fork += 1,
            DeviationKind::Other => other += 1,
        }
    }
    Ok(DeviationReport {
        count: deviations.len(),
        deviations,
        touch_deviations: touch,
        fork_child_deviations: fork,
        other_deviations: other,
    })
}

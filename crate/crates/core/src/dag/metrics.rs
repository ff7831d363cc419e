use super::{validate, Dag};
use crate::{Error, Result};

/// Nodes on a longest directed path, computed by DP in topological order.
pub fn longest_path_nodes(dag: &Dag) -> Option<usize> {
    let order = dag.topological_order()?;
    let mut best = vec![1usize; dag.len()];
    for u in order {
        for c in dag.children(u) {
            best[c.0] = best[c.0].max(best[u.0] + 1);
        }
    }
    best.into_iter().max()
}

/// Span in nodes: a single node has span 1.
pub fn compute_span(dag: &Dag) -> Result<usize> {
    let report = validate(dag);
    if !report.is_valid() {
        return Err(Error::InvalidDag(report));
    }
    Ok(longest_path_nodes(dag).expect("validated DAG is acyclic"))
}

/// Number of nodes annotated as real touches that have an incoming touch
/// edge. Joins used only for synchronization are not counted.
pub fn count_touches(dag: &Dag) -> Result<usize> {
    let report = validate(dag);
    if !report.is_valid() {
        return Err(Error::InvalidDag(report));
    }
    Ok(dag
        .nodes()
        .iter()
        .filter(|n| n.is_real_touch && dag.is_sync_node(n.id))
        .count())
}

use serde::{Deserialize, Serialize};

use super::{validate, Dag, EdgeKind, NodeId};
use crate::{Error, Result};

/// Maximal continuation chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: usize,
    pub node_chain: Vec<NodeId>,
    pub parent_thread: Option<usize>,
    pub fork_node: Option<NodeId>,
}

impl Thread {
    pub fn first(&self) -> NodeId {
        self.node_chain[0]
    }

    pub fn last(&self) -> NodeId {
        *self.node_chain.last().expect("threads are non-empty")
    }
}

/// Threads plus a node-to-thread index.
#[derive(Debug, Clone)]
pub struct ThreadMap {
    pub threads: Vec<Thread>,
    pub thread_of: Vec<usize>,
}

impl ThreadMap {
    /// Assumes `dag` already passed validation.
    pub(crate) fn build_unchecked(dag: &Dag) -> ThreadMap {
        let mut starts: Vec<(NodeId, Option<NodeId>)> = vec![(dag.root(), None)];
        let mut spawned: Vec<(NodeId, NodeId)> = dag
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Future)
            .map(|e| (e.to, e.from))
            .collect();
        spawned.sort();
        starts.extend(spawned.into_iter().map(|(first, fork)| (first, Some(fork))));

        let mut thread_of = vec![usize::MAX; dag.len()];
        let mut threads = Vec::with_capacity(starts.len());
        for (tid, (first, fork)) in starts.into_iter().enumerate() {
            let mut chain = vec![first];
            let mut cur = first;
            thread_of[first.0] = tid;
            while let Some(next) = dag.continuation(cur) {
                chain.push(next);
                thread_of[next.0] = tid;
                cur = next;
            }
            threads.push(Thread {
                thread_id: tid,
                node_chain: chain,
                parent_thread: None,
                fork_node: fork,
            });
        }
        for t in threads.iter_mut() {
            t.parent_thread = t.fork_node.map(|f| thread_of[f.0]);
        }
        ThreadMap { threads, thread_of }
    }

    pub fn build(dag: &Dag) -> Result<ThreadMap> {
        let report = validate(dag);
        if !report.is_valid() {
            return Err(Error::InvalidDag(report));
        }
        Ok(Self::build_unchecked(dag))
    }

    pub fn thread_of(&self, id: NodeId) -> &Thread {
        &self.threads[self.thread_of[id.0]]
    }

    /// Thread spawned at `fork`, if it is a fork.
    pub fn spawned_by(&self, dag: &Dag, fork: NodeId) -> Option<&Thread> {
        dag.fork_children(fork)
            .map(|(left, _)| self.thread_of(left))
    }
}

/// Partitions the nodes of a valid DAG into threads. The main thread is
/// thread 0; the rest are ordered by the id of their first node.
pub fn decompose_threads(dag: &Dag) -> Result<Vec<Thread>> {
    Ok(ThreadMap::build(dag)?.threads)
}

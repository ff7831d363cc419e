//! Computation DAG model.
//!
//! A DAG is a set of unit-time nodes joined by three kinds of edges.
//! Continuation edges chain the nodes of one thread, a future edge leaves a
//! fork and starts a new thread, and a touch edge runs from the node that
//! produces a future value to the node that consumes it.

mod classify;
mod metrics;
mod reach;
mod threads;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use classify::{classify, ClassificationReport};
pub use metrics::{compute_span, count_touches, longest_path_nodes};
pub use reach::Reachability;
pub use threads::{decompose_threads, Thread, ThreadMap};
pub use validate::{validate, ValidationReport, Violation};

/// Dense node index, `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A memory block. Equal ids are the same block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Continuation,
    Future,
    Touch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Block accessed by this node's instruction, if any.
    pub block: Option<BlockId>,
    /// False for in-degree-2 nodes that only synchronize (joins).
    pub is_real_touch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EdgeKind,
}

/// Immutable computation DAG with adjacency indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: NodeId,
    final_node: NodeId,
    super_final_mode: bool,
    landmarks: BTreeMap<String, NodeId>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

/// On-disk JSON shape of a DAG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagFile {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub root: usize,
    #[serde(rename = "final")]
    pub final_node: usize,
    #[serde(default)]
    pub super_final_mode: bool,
    #[serde(default)]
    pub landmarks: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub block: Option<u32>,
    #[serde(default)]
    pub is_real_touch: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

impl Dag {
    /// Builds a DAG from raw parts. Only index-level consistency is checked
    /// here; structural rules are reported by [`validate`].
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        root: NodeId,
        final_node: NodeId,
        super_final_mode: bool,
        landmarks: BTreeMap<String, NodeId>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::MalformedDag("DAG has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id.0 != i {
                return Err(Error::MalformedDag(format!(
                    "node ids must be dense 0..{n}: position {i} holds id {}",
                    node.id
                )));
            }
        }
        let in_range = |id: NodeId| id.0 < n;
        if !in_range(root) || !in_range(final_node) {
            return Err(Error::MalformedDag("root or final out of range".into()));
        }
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if !in_range(e.from) || !in_range(e.to) {
                return Err(Error::MalformedDag(format!(
                    "edge {} -> {} references a missing node",
                    e.from, e.to
                )));
            }
            out_edges[e.from.0].push(i);
            in_edges[e.to.0].push(i);
        }
        for (name, id) in &landmarks {
            if !in_range(*id) {
                return Err(Error::MalformedDag(format!("landmark {name} out of range")));
            }
        }
        Ok(Dag {
            nodes,
            edges,
            root,
            final_node,
            super_final_mode,
            landmarks,
            out_edges,
            in_edges,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn final_node(&self) -> NodeId {
        self.final_node
    }

    pub fn super_final_mode(&self) -> bool {
        self.super_final_mode
    }

    pub fn landmarks(&self) -> &BTreeMap<String, NodeId> {
        &self.landmarks
    }

    /// Looks up a landmark by name.
    pub fn landmark(&self, name: &str) -> Option<NodeId> {
        self.landmarks.get(name).copied()
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.out_edges[id.0].iter().map(move |&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.in_edges[id.0].iter().map(move |&i| &self.edges[i])
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out_edges[id.0].len()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.in_edges[id.0].len()
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges(id).map(|e| e.to)
    }

    pub fn parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(id).map(|e| e.from)
    }

    fn out_of_kind(&self, id: NodeId, kind: EdgeKind) -> Option<NodeId> {
        self.out_edges(id).find(|e| e.kind == kind).map(|e| e.to)
    }

    fn in_of_kind(&self, id: NodeId, kind: EdgeKind) -> Option<NodeId> {
        self.in_edges(id).find(|e| e.kind == kind).map(|e| e.from)
    }

    /// Continuation successor (next node of the same thread).
    pub fn continuation(&self, id: NodeId) -> Option<NodeId> {
        self.out_of_kind(id, EdgeKind::Continuation)
    }

    /// True if the node spawns a future thread.
    pub fn is_fork(&self, id: NodeId) -> bool {
        self.out_of_kind(id, EdgeKind::Future).is_some()
    }

    /// `(future child, right child)` of a fork.
    pub fn fork_children(&self, id: NodeId) -> Option<(NodeId, NodeId)> {
        let left = self.out_of_kind(id, EdgeKind::Future)?;
        let right = self.out_of_kind(id, EdgeKind::Continuation)?;
        Some((left, right))
    }

    /// True if some touch edge enters the node (touches and joins alike).
    pub fn is_sync_node(&self, id: NodeId) -> bool {
        self.in_of_kind(id, EdgeKind::Touch).is_some()
    }

    /// Future parents of a synchronization node.
    pub fn future_parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(id)
            .filter(|e| e.kind == EdgeKind::Touch)
            .map(|e| e.from)
    }

    /// Local (continuation) parent of a node.
    pub fn local_parent(&self, id: NodeId) -> Option<NodeId> {
        self.in_of_kind(id, EdgeKind::Continuation)
    }

    /// Nodes reached from `id` through touch edges.
    pub fn touch_targets(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges(id)
            .filter(|e| e.kind == EdgeKind::Touch)
            .map(|e| e.to)
    }

    /// Kahn topological order, or `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let n = self.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.in_edges[i].len()).collect();
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        stack.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = stack.pop() {
            order.push(NodeId(u));
            for &ei in self.out_edges[u].iter().rev() {
                let v = self.edges[ei].to.0;
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn to_file(&self) -> DagFile {
        DagFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.0,
                    block: n.block.map(|b| b.0),
                    is_real_touch: n.is_real_touch,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from.0,
                    to: e.to.0,
                    kind: e.kind,
                })
                .collect(),
            root: self.root.0,
            final_node: self.final_node.0,
            super_final_mode: self.super_final_mode,
            landmarks: self
                .landmarks
                .iter()
                .map(|(k, v)| (k.clone(), v.0))
                .collect(),
        }
    }

    pub fn from_file(file: DagFile) -> Result<Self> {
        let nodes = file
            .nodes
            .into_iter()
            .map(|r| Node {
                id: NodeId(r.id),
                block: r.block.map(BlockId),
                is_real_touch: r.is_real_touch,
            })
            .collect();
        let edges = file
            .edges
            .into_iter()
            .map(|r| Edge {
                from: NodeId(r.from),
                to: NodeId(r.to),
                kind: r.kind,
            })
            .collect();
        let landmarks = file
            .landmarks
            .into_iter()
            .map(|(k, v)| (k, NodeId(v)))
            .collect();
        Dag::new(
            nodes,
            edges,
            NodeId(file.root),
            NodeId(file.final_node),
            file.super_final_mode,
            landmarks,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("DAG serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DagFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedDag(e.to_string()))?;
        Dag::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dag::from_json(&std::fs::read_to_string(path)?)
    }

    /// Stable content hash of the serialized DAG.
    pub fn content_hash(&self) -> String {
        crate::hash::json_hash(&self.to_file())
    }
}

/// Incremental DAG construction used by generators and tests.
#[derive(Debug, Default, Clone)]
pub struct DagBuilder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    landmarks: BTreeMap<String, NodeId>,
    super_final_mode: bool,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn super_final(mut self, on: bool) -> Self {
        self.super_final_mode = on;
        self
    }

    pub fn node(&mut self) -> NodeId {
        self.node_with_block(None)
    }

    pub fn node_with_block(&mut self, block: Option<u32>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            block: block.map(BlockId),
            is_real_touch: false,
        });
        id
    }

    pub fn set_block(&mut self, id: NodeId, block: Option<u32>) {
        self.nodes[id.0].block = block.map(BlockId);
    }

    pub fn edge(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) {
        self.edges.push(Edge { from, to, kind });
    }

    pub fn cont(&mut self, from: NodeId, to: NodeId) {
        self.edge(from, to, EdgeKind::Continuation);
    }

    pub fn future(&mut self, from: NodeId, to: NodeId) {
        self.edge(from, to, EdgeKind::Future);
    }

    /// Adds a touch edge and marks the target as a real touch.
    pub fn touch(&mut self, from: NodeId, to: NodeId) {
        self.edge(from, to, EdgeKind::Touch);
        self.nodes[to.0].is_real_touch = true;
    }

    /// Adds a touch edge whose target only synchronizes.
    pub fn join(&mut self, from: NodeId, to: NodeId) {
        self.edge(from, to, EdgeKind::Touch);
    }

    /// Appends a continuation chain of fresh nodes after `from`, one per
    /// entry of `blocks`; returns the nodes in order.
    pub fn chain_after(&mut self, from: NodeId, blocks: &[Option<u32>]) -> Vec<NodeId> {
        let mut prev = from;
        let mut out = Vec::with_capacity(blocks.len());
        for &b in blocks {
            let n = self.node_with_block(b);
            self.cont(prev, n);
            out.push(n);
            prev = n;
        }
        out
    }

    pub fn mark(&mut self, name: impl Into<String>, id: NodeId) {
        self.landmarks.insert(name.into(), id);
    }

    pub fn landmark(&self, name: &str) -> Option<NodeId> {
        self.landmarks.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn build(self, root: NodeId, final_node: NodeId) -> Result<Dag> {
        Dag::new(
            self.nodes,
            self.edges,
            root,
            final_node,
            self.super_final_mode,
            self.landmarks,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_preserves_everything() {
        let mut b = DagBuilder::new();
        let r = b.node_with_block(Some(3));
        let f = b.node();
        b.cont(r, f);
        b.mark("root", r);
        let dag = b.build(r, f).unwrap();
        let back = Dag::from_json(&dag.to_json()).unwrap();
        assert_eq!(dag, back);
        assert_eq!(dag.content_hash(), back.content_hash());
    }

    #[test]
    fn rejects_sparse_ids() {
        let text = r#"{"nodes":[{"id":0,"block":null,"is_real_touch":false},
            {"id":2,"block":null,"is_real_touch":false}],
            "edges":[],"root":0,"final":1,"super_final_mode":false,"landmarks":{}}"#;
        assert!(matches!(Dag::from_json(text), Err(Error::MalformedDag(_))));
    }

    #[test]
    fn rejects_dangling_edge() {
        let text = r#"{"nodes":[{"id":0,"block":null,"is_real_touch":false}],
            "edges":[{"from":0,"to":5,"kind":"continuation"}],
            "root":0,"final":0,"super_final_mode":false,"landmarks":{}}"#;
        assert!(Dag::from_json(text).is_err());
    }
}

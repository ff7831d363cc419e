use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dag, EdgeKind, NodeId};

/// One broken structural rule and the nodes that break it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.rule.as_str()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                let ids: Vec<String> = v.nodes.iter().map(|n| n.to_string()).collect();
                format!("{} [{}]", v.rule, ids.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub mod rules {
    pub const CYCLE: &str = "cycle";
    pub const SELF_LOOP: &str = "self-loop";
    pub const DUPLICATE_EDGE: &str = "duplicate-edge";
    pub const ROOT_HAS_PARENTS: &str = "root-has-parents";
    pub const FINAL_HAS_CHILDREN: &str = "final-has-children";
    pub const DEGREE_BOUNDS: &str = "degree-bounds";
    pub const OUT_EDGE_KINDS: &str = "out-edge-kinds";
    pub const IN_EDGE_KINDS: &str = "in-edge-kinds";
    pub const FORK_CHILD_IS_TOUCH: &str = "fork-child-is-touch";
    pub const THREAD_END: &str = "thread-end";
    pub const MAIN_THREAD: &str = "main-thread";
    pub const UNREACHABLE: &str = "unreachable";
}

#[derive(Default)]
struct Collector {
    found: BTreeMap<&'static str, Vec<NodeId>>,
}

impl Collector {
    fn add(&mut self, rule: &'static str, node: NodeId) {
        let list = self.found.entry(rule).or_default();
        if !list.contains(&node) {
            list.push(node);
        }
    }

    fn finish(self) -> ValidationReport {
        const ORDER: [&str; 12] = [
            rules::CYCLE,
            rules::SELF_LOOP,
            rules::DUPLICATE_EDGE,
            rules::ROOT_HAS_PARENTS,
            rules::FINAL_HAS_CHILDREN,
            rules::DEGREE_BOUNDS,
            rules::OUT_EDGE_KINDS,
            rules::IN_EDGE_KINDS,
            rules::FORK_CHILD_IS_TOUCH,
            rules::THREAD_END,
            rules::MAIN_THREAD,
            rules::UNREACHABLE,
        ];
        let mut found = self.found;
        let violations = ORDER
            .iter()
            .filter_map(|rule| {
                found.remove(rule).map(|mut nodes| {
                    nodes.sort();
                    Violation {
                        rule: rule.to_string(),
                        nodes,
                    }
                })
            })
            .collect();
        ValidationReport { violations }
    }
}

fn kind_counts(kinds: impl Iterator<Item = EdgeKind>) -> (usize, usize, usize) {
    kinds.fold((0, 0, 0), |(c, f, t), k| match k {
        EdgeKind::Continuation => (c + 1, f, t),
        EdgeKind::Future => (c, f + 1, t),
        EdgeKind::Touch => (c, f, t + 1),
    })
}

/// Checks every structural rule of the DAG model. Never fails; malformed
/// input is described in the returned report.
pub fn validate(dag: &Dag) -> ValidationReport {
    let mut out = Collector::default();
    let root = dag.root();
    let fin = dag.final_node();
    let single = root == fin;
    let sfm = dag.super_final_mode();

    let mut seen = HashSet::new();
    for e in dag.edges() {
        if e.from == e.to {
            out.add(rules::SELF_LOOP, e.from);
        }
        if !seen.insert((e.from, e.to)) {
            out.add(rules::DUPLICATE_EDGE, e.from);
        }
    }

    match dag.topological_order() {
        Some(_) => {}
        None => {
            for id in cyclic_nodes(dag) {
                out.add(rules::CYCLE, id);
            }
        }
    }

    if dag.in_degree(root) > 0 {
        out.add(rules::ROOT_HAS_PARENTS, root);
    }
    if dag.out_degree(fin) > 0 {
        out.add(rules::FINAL_HAS_CHILDREN, fin);
    }

    for node in dag.nodes() {
        let id = node.id;
        let indeg = dag.in_degree(id);
        let outdeg = dag.out_degree(id);
        let in_ok = if id == root {
            indeg == 0
        } else if id == fin && sfm {
            indeg >= 1
        } else {
            (1..=2).contains(&indeg)
        };
        let out_ok = if id == fin {
            outdeg == 0
        } else {
            (1..=2).contains(&outdeg)
        };
        if !(in_ok && out_ok) && !(single && indeg == 0 && outdeg == 0) {
            out.add(rules::DEGREE_BOUNDS, id);
        }

        let (oc, of, ot) = kind_counts(dag.out_edges(id).map(|e| e.kind));
        let out_kinds_ok = matches!(
            (oc, of, ot),
            (0, 0, 0) | (1, 0, 0) | (0, 0, 1) | (1, 1, 0) | (1, 0, 1)
        );
        if !out_kinds_ok {
            out.add(rules::OUT_EDGE_KINDS, id);
        }

        let (ic, ifu, it) = kind_counts(dag.in_edges(id).map(|e| e.kind));
        let in_kinds_ok = if id == fin && sfm {
            (ic == 1 && ifu == 0) || (single && indeg == 0)
        } else {
            matches!((ic, ifu, it), (0, 0, 0) | (1, 0, 0) | (0, 1, 0) | (1, 0, 1))
        };
        if !in_kinds_ok {
            out.add(rules::IN_EDGE_KINDS, id);
        }

        if let Some((left, right)) = dag.fork_children(id) {
            for child in [left, right] {
                if dag.in_degree(child) != 1 || dag.is_sync_node(child) {
                    out.add(rules::FORK_CHILD_IS_TOUCH, child);
                }
            }
        }

        if id != fin && dag.continuation(id).is_none() {
            let single_touch_out =
                outdeg == 1 && dag.out_edges(id).all(|e| e.kind == EdgeKind::Touch);
            if !single_touch_out {
                out.add(rules::THREAD_END, id);
            }
        }
    }

    // The main thread must run from root to final along continuations.
    let mut cur = root;
    let mut steps = 0;
    while let Some(next) = dag.continuation(cur) {
        cur = next;
        steps += 1;
        if steps > dag.len() {
            break;
        }
    }
    if cur != fin {
        out.add(rules::MAIN_THREAD, cur);
    }

    let mut reached = vec![false; dag.len()];
    let mut stack = vec![root];
    reached[root.0] = true;
    while let Some(u) = stack.pop() {
        for c in dag.children(u) {
            if !reached[c.0] {
                reached[c.0] = true;
                stack.push(c);
            }
        }
    }
    for (i, r) in reached.iter().enumerate() {
        if !r {
            out.add(rules::UNREACHABLE, NodeId(i));
        }
    }

    out.finish()
}

/// Nodes left over after Kahn's algorithm, i.e. on or behind a cycle.
fn cyclic_nodes(dag: &Dag) -> Vec<NodeId> {
    let n = dag.len();
    let mut indeg: Vec<usize> = (0..n).map(|i| dag.in_degree(NodeId(i))).collect();
    let mut stack: Vec<NodeId> = (0..n).filter(|&i| indeg[i] == 0).map(NodeId).collect();
    let mut done = vec![false; n];
    while let Some(u) = stack.pop() {
        done[u.0] = true;
        for c in dag.children(u) {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                stack.push(c);
            }
        }
    }
    (0..n).filter(|&i| !done[i]).map(NodeId).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::DagBuilder;

    #[test]
    fn minimal_chain_is_valid() {
        let mut b = DagBuilder::new();
        let r = b.node();
        let f = b.node();
        b.cont(r, f);
        let dag = b.build(r, f).unwrap();
        assert!(validate(&dag).is_valid());
    }

    #[test]
    fn single_node_is_valid() {
        let mut b = DagBuilder::new();
        let r = b.node();
        let dag = b.build(r, r).unwrap();
        assert!(validate(&dag).is_valid(), "{}", validate(&dag));
    }

    #[test]
    fn fork_child_touch_is_reported() {
        // root forks: future child a, right child t; a touches t directly.
        let mut b = DagBuilder::new();
        let root = b.node();
        let a = b.node();
        let t = b.node();
        let f = b.node();
        b.future(root, a);
        b.cont(root, t);
        b.touch(a, t);
        b.cont(t, f);
        let dag = b.build(root, f).unwrap();
        let report = validate(&dag);
        assert!(report.has(rules::FORK_CHILD_IS_TOUCH), "{report}");
        assert_eq!(
            report
                .violations
                .iter()
                .filter(|v| v.rule == rules::FORK_CHILD_IS_TOUCH)
                .count(),
            1
        );
    }

    #[test]
    fn cycle_and_unreachable_are_reported() {
        let mut b = DagBuilder::new();
        let r = b.node();
        let f = b.node();
        let x = b.node();
        let y = b.node();
        b.cont(r, f);
        b.cont(x, y);
        b.cont(y, x);
        let dag = b.build(r, f).unwrap();
        let report = validate(&dag);
        assert!(report.has(rules::CYCLE));
        assert!(report.has(rules::UNREACHABLE));
    }

    #[test]
    fn thread_without_touch_end_is_reported() {
        // The spawned thread ends in a node with no outgoing edge.
        let mut b = DagBuilder::new();
        let root = b.node();
        let a = b.node();
        let r = b.node();
        let f = b.node();
        b.future(root, a);
        b.cont(root, r);
        b.cont(r, f);
        let dag = b.build(root, f).unwrap();
        let report = validate(&dag);
        assert!(report.has(rules::THREAD_END));
        assert!(report.has(rules::DEGREE_BOUNDS));
    }

    #[test]
    fn super_final_mode_allows_wide_final() {
        let build = |sfm: bool| {
            let mut b = DagBuilder::new().super_final(sfm);
            let root = b.node();
            let a = b.node();
            let r = b.node();
            let c = b.node();
            let r2 = b.node();
            let f = b.node();
            b.future(root, a);
            b.cont(root, r);
            b.future(r, c);
            b.cont(r, r2);
            b.cont(r2, f);
            b.touch(a, f);
            b.touch(c, f);
            b.build(root, f).unwrap()
        };
        assert!(
            validate(&build(true)).is_valid(),
            "{}",
            validate(&build(true))
        );
        assert!(validate(&build(false)).has(rules::DEGREE_BOUNDS));
    }
}

use serde::{Deserialize, Serialize};

use super::{validate, Dag, NodeId, Reachability, ThreadMap, Violation};
use crate::{Error, Result};

/// Which structured-computation disciplines a DAG satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub is_valid: bool,
    pub is_structured: bool,
    pub is_single_touch: bool,
    pub is_local_touch: bool,
    pub is_single_touch_super_final: bool,
    /// One entry per broken discipline rule; empty iff every flag holds.
    pub violations: Vec<Violation>,
}

pub mod rules {
    /// A touch's local parent is not a descendant of the spawning fork.
    pub const TOUCH_BEFORE_FORK: &str = "touch-before-fork";
    /// No touch of the future thread lies under the fork's right child.
    pub const NO_TOUCH_UNDER_RIGHT_CHILD: &str = "no-touch-under-right-child";
    /// A future thread is touched more than once.
    pub const MULTIPLE_TOUCHES: &str = "multiple-touches";
    /// A touch lies outside the parent thread of the touched thread.
    pub const NONLOCAL_TOUCH: &str = "nonlocal-touch";
    /// A touch is not under the fork's right child.
    pub const TOUCH_NOT_UNDER_RIGHT_CHILD: &str = "touch-not-under-right-child";
    pub const NOT_SUPER_FINAL_MODE: &str = "not-super-final-mode";
    /// Super-final discipline: more than one touch besides the final node.
    pub const SUPER_FINAL_SHAPE: &str = "super-final-shape";
}

/// Classifies a valid DAG into the structured families.
pub fn classify(dag: &Dag) -> Result<ClassificationReport> {
    let report = validate(dag);
    if !report.is_valid() {
        return Err(Error::InvalidDag(report));
    }
    let threads = ThreadMap::build_unchecked(dag);
    let reach = Reachability::new(dag);
    let fin = dag.final_node();
    let sfm = dag.super_final_mode();

    let mut broken: Vec<(&'static str, Vec<NodeId>)> = Vec::new();
    let mut flag =
        |rule: &'static str, node: NodeId| match broken.iter_mut().find(|(r, _)| *r == rule) {
            Some((_, nodes)) => {
                if !nodes.contains(&node) {
                    nodes.push(node)
                }
            }
            None => broken.push((rule, vec![node])),
        };

    let mut structured = true;
    let mut single = true;
    let mut local = true;
    let mut super_final = sfm;
    if !sfm {
        flag(rules::NOT_SUPER_FINAL_MODE, fin);
    }

    for node in dag.nodes() {
        let v = node.id;
        let Some((_, right)) = dag.fork_children(v) else {
            continue;
        };
        let spawned = threads.spawned_by(dag, v).expect("fork spawns a thread");
        let parent_tid = threads.thread_of[v.0];
        let mut touches: Vec<NodeId> = spawned
            .node_chain
            .iter()
            .flat_map(|&n| dag.touch_targets(n))
            .collect();
        touches.sort();
        touches.dedup();

        let under_right = |x: NodeId| reach.reaches(right, x);
        let local_ok = |x: NodeId| dag.local_parent(x).is_some_and(|lp| reach.reaches(v, lp));

        // Structured: every touch has its local parent below v, one under the right child.
        let mut this_structured = true;
        for &x in &touches {
            if !local_ok(x) {
                this_structured = false;
                flag(rules::TOUCH_BEFORE_FORK, x);
            }
        }
        if !touches.iter().any(|&x| under_right(x)) {
            this_structured = false;
            flag(rules::NO_TOUCH_UNDER_RIGHT_CHILD, v);
        }
        structured &= this_structured;

        // Single touch.
        if touches.len() != 1 {
            single = false;
            flag(rules::MULTIPLE_TOUCHES, v);
        }
        for &x in &touches {
            if !under_right(x) {
                single = false;
                local = false;
                flag(rules::TOUCH_NOT_UNDER_RIGHT_CHILD, x);
            }
        }

        // Local touch.
        for &x in &touches {
            if threads.thread_of[x.0] != parent_tid {
                local = false;
                flag(rules::NONLOCAL_TOUCH, x);
            }
        }

        // Single touch with a super final node: one real touch under the
        // right child, the final node, or both.
        if sfm {
            let others: Vec<NodeId> = touches.iter().copied().filter(|&x| x != fin).collect();
            let ok = !touches.is_empty()
                && others.len() <= 1
                && others.iter().all(|&x| under_right(x) && local_ok(x));
            if !ok {
                super_final = false;
                flag(rules::SUPER_FINAL_SHAPE, v);
            }
        }
    }

    let is_structured = structured;
    let is_single_touch = is_structured && single;
    let is_local_touch = is_structured && local;
    let is_single_touch_super_final = super_final;

    let violations = broken
        .into_iter()
        .map(|(rule, mut nodes)| {
            nodes.sort();
            Violation {
                rule: rule.to_string(),
                nodes,
            }
        })
        .collect();

    Ok(ClassificationReport {
        is_valid: true,
        is_structured,
        is_single_touch,
        is_local_touch,
        is_single_touch_super_final,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::DagBuilder;

    /// spawn a; right; touch a at join.
    fn fork_join() -> Dag {
        let mut b = DagBuilder::new();
        let fork = b.node();
        let a = b.node();
        let right = b.node();
        let join = b.node();
        b.future(fork, a);
        b.cont(fork, right);
        b.cont(right, join);
        b.touch(a, join);
        b.build(fork, join).unwrap()
    }

    #[test]
    fn fork_join_is_single_and_local_touch() {
        let c = classify(&fork_join()).unwrap();
        assert!(c.is_structured && c.is_single_touch && c.is_local_touch);
        assert!(!c.is_single_touch_super_final);
    }

    /// Main thread: root forks x (right child); the future thread starting
    /// at p1 itself spawns u (which produces the future) only later, while
    /// the touch by the right branch was placed before that spawn.
    #[test]
    fn touch_before_spawn_is_unstructured() {
        let mut b = DagBuilder::new();
        let root = b.node();
        let p1 = b.node(); // future thread of root
        let u = b.node(); // fork inside p1's thread
        let g = b.node(); // future thread of u (single node)
        let p2 = b.node(); // right child of u
        let x = b.node(); // right child of root
        let v = b.node(); // touch of g by the root's right branch
        let j = b.node(); // join of p1's thread into main
        b.future(root, p1);
        b.cont(root, x);
        b.cont(p1, u);
        b.future(u, g);
        b.cont(u, p2);
        b.cont(x, v);
        b.touch(g, v);
        b.cont(v, j);
        b.touch(p2, j);
        let dag = b.build(root, j).unwrap();
        assert!(validate(&dag).is_valid(), "{}", validate(&dag));
        let c = classify(&dag).unwrap();
        assert!(!c.is_structured);
        assert!(c
            .violations
            .iter()
            .any(|v| v.rule == rules::TOUCH_BEFORE_FORK));
    }

    /// A future thread with two nodes, both touched in the parent thread.
    #[test]
    fn double_local_touch() {
        let mut b = DagBuilder::new();
        let fork = b.node();
        let a1 = b.node();
        let a2 = b.node();
        let r = b.node();
        let t1 = b.node();
        let t2 = b.node();
        b.future(fork, a1);
        b.cont(a1, a2);
        b.cont(fork, r);
        b.cont(r, t1);
        b.cont(t1, t2);
        b.touch(a1, t1);
        b.touch(a2, t2);
        let dag = b.build(fork, t2).unwrap();
        assert!(validate(&dag).is_valid(), "{}", validate(&dag));
        let c = classify(&dag).unwrap();
        assert!(c.is_structured);
        assert!(c.is_local_touch);
        assert!(!c.is_single_touch);
    }

    #[test]
    fn invalid_input_errors() {
        let mut b = DagBuilder::new();
        let r = b.node();
        let f = b.node();
        let dag = b.build(r, f).unwrap();
        assert!(classify(&dag).is_err());
    }
}

//! Lower-bound DAGs for the future-first policy.
//!
//! One block has a main thread `v, u_1, .., u_k, e, j`. `v` spawns the
//! single-node thread `w`; each `u_i` spawns the thread
//! `x_i, Y_i, s_i, Z_i`. Node `s_1` touches `w`, `s_{i+1}` touches the
//! thread of `u_i`, and `j` touches the thread of `u_k`. Sequentially the
//! order is `v, w, u_1, x_1, Y_1, s_1, Z_1, u_2, ..`. If `w` is delayed, a
//! thief runs every `u_i, x_i, Y_i` first and each `s_i` deviates.

use serde_json::json;

use super::{require, GeneratedCase};
use crate::dag::{DagBuilder, NodeId};
use crate::sched::{Directive, ForkPolicy, ScheduleScript, WakeCondition};
use crate::Result;

/// Handles to the nodes of one block that schedules refer to.
#[derive(Debug, Clone)]
struct FfBlock {
    v: NodeId,
    y_last: NodeId,
    z_last: NodeId,
    /// Main-thread exit (the join of the last spawned thread).
    j: NodeId,
}

fn until(nodes: &[NodeId]) -> Directive {
    Directive::Sleep {
        until: WakeCondition::Executed(nodes.to_vec()),
    }
}

fn steps(n: u64) -> Directive {
    Directive::Sleep {
        until: WakeCondition::Steps(n),
    }
}

fn forever() -> Directive {
    Directive::Sleep {
        until: WakeCondition::Forever,
    }
}

/// Builds one block; `prefix` namespaces its landmarks.
fn build_block(b: &mut DagBuilder, k: usize, cache: Option<u32>, prefix: &str) -> FfBlock {
    let len = cache.unwrap_or(1) as usize;
    let top = cache.map(|c| c + 1);
    let blk = |x: u32| cache.map(|_| x);
    let name = |s: String| format!("{prefix}{s}");

    let v = b.node();
    let w = b.node();
    b.future(v, w);
    b.mark(name("v".into()), v);
    b.mark(name("w".into()), w);

    let mut prev_main = v;
    let mut pending = w; // last node of the thread the next s_i touches
    let mut y_last = v;
    let mut z_last = v;
    for i in 1..=k {
        let u = b.node_with_block(top);
        b.cont(prev_main, u);
        let x = b.node_with_block(top);
        b.future(u, x);
        let ys: Vec<Option<u32>> = (1..=len as u32).map(blk).collect();
        let y = b.chain_after(x, &ys);
        let s = b.node_with_block(cache);
        b.cont(*y.last().unwrap(), s);
        b.touch(pending, s);
        let zs: Vec<Option<u32>> = (1..=len as u32).rev().map(blk).collect();
        let z = b.chain_after(s, &zs);

        b.mark(name(format!("u_{i}")), u);
        b.mark(name(format!("x_{i}")), x);
        b.mark(name(format!("s_{i}")), s);
        b.mark(name(format!("Y_{i}_first")), y[0]);
        b.mark(name(format!("Y_{i}_last")), *y.last().unwrap());
        b.mark(name(format!("Z_{i}_first")), z[0]);
        b.mark(name(format!("Z_{i}_last")), *z.last().unwrap());

        y_last = *y.last().unwrap();
        z_last = *z.last().unwrap();
        pending = z_last;
        prev_main = u;
    }
    let e = b.node();
    b.cont(prev_main, e);
    let j = b.node();
    b.cont(e, j);
    b.touch(pending, j);
    b.mark(name("e".into()), e);
    b.mark(name("j".into()), j);
    FfBlock {
        v,
        y_last,
        z_last,
        j,
    }
}

fn cache_lines(cache: bool, c: i64) -> Result<Option<u32>> {
    if cache {
        require(c >= 2, format!("cache variant needs C >= 2, got {c}"))?;
        Ok(Some(c as u32))
    } else {
        Ok(None)
    }
}

/// Single block on two processors. Processor 0 runs `v` and sleeps in
/// front of `w`; processor 1 steals `u_1` and runs all `u_i, x_i, Y_i`;
/// then processor 0 finishes and steals `e` back.
pub fn gen_ff_block(k: i64, cache: bool, c: i64) -> Result<GeneratedCase> {
    require(k >= 1, format!("k must be >= 1, got {k}"))?;
    let lines = cache_lines(cache, c)?;
    let mut b = DagBuilder::new();
    let blk = build_block(&mut b, k as usize, lines, "");
    let dag = b.build(blk.v, blk.j)?;

    let mut script = ScheduleScript::seeded(0);
    script.push(0, Directive::Execute { count: 1 });
    script.push(0, until(&[blk.y_last]));
    script.push(0, Directive::ExecuteUntil { node: blk.z_last });
    script.push(0, Directive::StealFrom { victim: 1 });
    script.push(1, Directive::StealFrom { victim: 0 });
    script.push(1, Directive::ExecuteUntil { node: blk.y_last });
    script.push(1, forever());

    Ok(GeneratedCase {
        dag,
        script_hint: script,
        processors: 2,
        policy: ForkPolicy::FutureFirst,
        params: json!({"family": "ff-block", "k": k, "cache": cache, "C": c}),
    })
}

/// The chain of blocks hung off a spine `r_1, .., r_k, q, t_1, .., t_k`.
struct Amplified {
    r1: NodeId,
    blocks: Vec<FfBlock>,
    /// Right children of `r_1..r_k`: `r_2, .., r_k, q`.
    spine_next: Vec<NodeId>,
    exit: NodeId,
}

fn build_amplified(b: &mut DagBuilder, k: usize, cache: Option<u32>, prefix: &str) -> Amplified {
    let rs: Vec<NodeId> = (0..k).map(|_| b.node()).collect();
    let mut blocks = Vec::with_capacity(k);
    for (i, &r) in rs.iter().enumerate() {
        b.mark(format!("{prefix}r_{}", i + 1), r);
        let blk = build_block(b, k, cache, &format!("{prefix}B{}.", i + 1));
        b.future(r, blk.v);
        blocks.push(blk);
    }
    let q = b.node();
    b.mark(format!("{prefix}q"), q);
    let mut spine_next = rs[1..].to_vec();
    spine_next.push(q);
    for (i, &r) in rs.iter().enumerate() {
        b.cont(r, spine_next[i]);
    }
    let mut prev = q;
    for (i, blk) in blocks.iter().enumerate() {
        let t = b.node();
        b.cont(prev, t);
        b.touch(blk.j, t);
        b.mark(format!("{prefix}t_{}", i + 1), t);
        prev = t;
    }
    Amplified {
        r1: rs[0],
        blocks,
        spine_next,
        exit: prev,
    }
}

/// Processor roles for one amplified structure.
struct Roles {
    /// Runs `r_1, v_1` first.
    first: usize,
    /// Steals `r_2` first.
    holder: usize,
    thief: usize,
}

/// Appends the three-processor schedule for `amp`. The structure's first
/// processor must already be positioned to run `r_1` next; `gate` lists
/// nodes the helpers wait for before joining in.
fn schedule_amplified(
    script: &mut ScheduleScript,
    amp: &Amplified,
    roles: &Roles,
    gate: &[NodeId],
) {
    let k = amp.blocks.len();
    let (mut a, mut h) = (roles.first, roles.holder);
    let thief = roles.thief;

    script.push(
        a,
        Directive::ExecuteUntil {
            node: amp.blocks[0].v,
        },
    );
    let mut start_gate: Vec<NodeId> = gate.to_vec();
    start_gate.push(amp.blocks[0].v);
    script.push(h, until(&start_gate));
    script.push(h, Directive::StealFrom { victim: a });
    script.push(thief, until(&start_gate));

    for i in 0..k {
        let blk = &amp.blocks[i];
        // The thief steals u_1 one turn after the holder took the spine node.
        script.push(thief, steps(1));
        script.push(thief, Directive::StealFrom { victim: a });
        script.push(thief, Directive::ExecuteUntil { node: blk.y_last });

        script.push(a, until(&[blk.y_last]));
        script.push(a, Directive::ExecuteUntil { node: blk.z_last });
        script.push(a, Directive::StealFrom { victim: thief });
        script.push(a, Directive::ExecuteUntil { node: blk.j });

        script.push(h, until(&[blk.j]));
        if i + 1 < k {
            let next = &amp.blocks[i + 1];
            script.push(h, Directive::ExecuteUntil { node: next.v });
            script.push(thief, until(&[next.v]));
            script.push(a, until(&[next.v]));
            script.push(a, Directive::StealFrom { victim: h });
            std::mem::swap(&mut a, &mut h);
        } else {
            script.push(h, Directive::ExecuteUntil { node: amp.exit });
        }
    }
    debug_assert_eq!(amp.spine_next.len(), k);
}

/// `k` blocks of size `k` on a spine, three processors; `k^2` touches
/// deviate.
pub fn gen_ff_amplified(k: i64) -> Result<GeneratedCase> {
    gen_ff_amplified_with(k, false, 2)
}

/// As [`gen_ff_amplified`], optionally with the cache block layout.
pub fn gen_ff_amplified_with(k: i64, cache: bool, c: i64) -> Result<GeneratedCase> {
    require(k >= 1, format!("k must be >= 1, got {k}"))?;
    let lines = cache_lines(cache, c)?;
    let mut b = DagBuilder::new();
    let amp = build_amplified(&mut b, k as usize, lines, "");
    let (root, exit) = (amp.r1, amp.exit);

    let mut script = ScheduleScript::seeded(0);
    let roles = Roles {
        first: 0,
        holder: 2,
        thief: 1,
    };
    schedule_amplified(&mut script, &amp, &roles, &[]);
    script.push(1, forever());

    let dag = b.build(root, exit)?;
    Ok(GeneratedCase {
        dag,
        script_hint: script,
        processors: 3,
        policy: ForkPolicy::FutureFirst,
        params: json!({"family": "ff-amplified", "k": k, "cache": cache, "C": c}),
    })
}

enum Tree {
    Leaf(usize),
    Fork {
        fork: NodeId,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    fn leftmost_leaf(&self) -> usize {
        match self {
            Tree::Leaf(i) => *i,
            Tree::Fork { left, .. } => left.leftmost_leaf(),
        }
    }

    /// Right subtrees pushed while descending the leftmost path, top of
    /// deque first.
    fn pushed_on_descent(&self) -> Vec<&Tree> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Tree::Fork { left, right, .. } = cur {
            out.push(right.as_ref());
            cur = left;
        }
        out
    }
}

/// Builds a fork tree of depth `levels` whose leaves are amplified
/// structures; returns `(tree, entry, exit)`.
fn build_tree(
    b: &mut DagBuilder,
    levels: u32,
    k: usize,
    cache: Option<u32>,
    leaves: &mut Vec<Amplified>,
) -> (Tree, NodeId, NodeId) {
    if levels == 0 {
        let idx = leaves.len();
        let amp = build_amplified(b, k, cache, &format!("S{}.", idx + 1));
        let (entry, exit) = (amp.r1, amp.exit);
        b.mark(format!("S_{}", idx + 1), entry);
        leaves.push(amp);
        return (Tree::Leaf(idx), entry, exit);
    }
    let fork = b.node();
    let (lt, le, lx) = build_tree(b, levels - 1, k, cache, leaves);
    let (rt, re, rx) = build_tree(b, levels - 1, k, cache, leaves);
    let join = b.node();
    b.future(fork, le);
    b.cont(fork, re);
    b.cont(rx, join);
    b.touch(lx, join);
    (
        Tree::Fork {
            fork,
            left: Box::new(lt),
            right: Box::new(rt),
        },
        fork,
        join,
    )
}

/// Binary fork tree over `n` amplified structures, `3n` processors.
pub fn gen_ff_full(n: i64, k: i64, cache: bool, c: i64) -> Result<GeneratedCase> {
    require(
        n >= 1 && (n as u64).is_power_of_two(),
        format!("n must be a power of two, got {n}"),
    )?;
    require(k >= 1, format!("k must be >= 1, got {k}"))?;
    let lines = cache_lines(cache, c)?;
    let n = n as usize;
    let mut b = DagBuilder::new();
    let mut leaves = Vec::with_capacity(n);
    let (tree, root, exit) = build_tree(&mut b, n.trailing_zeros(), k as usize, lines, &mut leaves);
    let mut fork_count = 0;
    mark_tree_forks(&mut b, &tree, &mut fork_count);

    // Leaf acquisition: processor 0 descends to S_1; every further
    // acquirer waits for the previous one to settle, then steals the
    // topmost pending subtree and descends to its leftmost leaf.
    let mut script = ScheduleScript::seeded(0);
    let mut acquirer_of = vec![0usize; n];
    let mut pending: Vec<(usize, Vec<&Tree>)> = vec![(0, tree.pushed_on_descent())];
    let mut last_settled = leaves[0].blocks[0].v;
    for m in 1..n {
        let (victim, list) = pending
            .iter_mut()
            .find(|(_, l)| !l.is_empty())
            .expect("one pending subtree per remaining leaf");
        let victim = *victim;
        let sub = list.remove(0);
        let leaf = sub.leftmost_leaf();
        acquirer_of[leaf] = m;
        script.push(m, until(&[last_settled]));
        script.push(m, Directive::StealFrom { victim });
        last_settled = leaves[leaf].blocks[0].v;
        pending.push((m, sub.pushed_on_descent()));
    }
    let all_settled = last_settled;

    let leaf_exits: Vec<NodeId> = leaves.iter().map(|l| l.exit).collect();
    for (leaf, amp) in leaves.iter().enumerate() {
        let roles = Roles {
            first: acquirer_of[leaf],
            holder: n + leaf,
            thief: 2 * n + leaf,
        };
        schedule_amplified(&mut script, amp, &roles, &[all_settled]);
        // Park everyone until all leaves are done, then finish by default.
        for p in [roles.first, roles.holder, roles.thief] {
            script.push(p, until(&leaf_exits));
        }
    }

    let dag = b.build(root, exit)?;
    Ok(GeneratedCase {
        dag,
        script_hint: script,
        processors: 3 * n,
        policy: ForkPolicy::FutureFirst,
        params: json!({"family": "ff-full", "n": n, "k": k, "cache": cache, "C": c}),
    })
}

fn mark_tree_forks(b: &mut DagBuilder, tree: &Tree, count: &mut usize) {
    if let Tree::Fork { fork, left, right } = tree {
        *count += 1;
        b.mark(format!("tree_fork_{count}"), *fork);
        mark_tree_forks(b, left, count);
        mark_tree_forks(b, right, count);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate_cache, CacheConfig};
    use crate::dag::{classify, validate};
    use crate::sched::{count_deviations, run_parallel, run_sequential};

    fn run(case: &GeneratedCase) -> (crate::sched::ExecutionTrace, crate::sched::ExecutionTrace) {
        let seq = run_sequential(&case.dag, case.policy).unwrap();
        let par = run_parallel(&case.dag, case.policy, case.processors, &case.script_hint).unwrap();
        (seq, par)
    }

    #[test]
    fn block_touch_deviations_are_the_s_nodes() {
        for k in [1, 4, 8] {
            let case = gen_ff_block(k, false, 2).unwrap();
            assert!(validate(&case.dag).is_valid());
            assert!(classify(&case.dag).unwrap().is_single_touch);
            let (seq, par) = run(&case);
            let dev = count_deviations(&case.dag, &seq, &par).unwrap();
            let want: Vec<NodeId> = (1..=k).map(|i| case.node(&format!("s_{i}"))).collect();
            assert_eq!(dev.touch_nodes(&case.dag), want, "k={k}");
            assert_eq!(dev.count, 2 * k as usize, "k={k} {:?}", dev);
        }
    }

    #[test]
    fn block_cache_misses() {
        let (k, c) = (8i64, 4i64);
        let case = gen_ff_block(k, true, c).unwrap();
        let (seq, par) = run(&case);
        let cfg = CacheConfig::new(c as usize).unwrap();
        let s = simulate_cache(&seq, &case.dag, cfg).unwrap();
        let p = simulate_cache(&par, &case.dag, cfg).unwrap();
        assert_eq!(s.total_misses, (c + 2 * k - 1) as u64);
        assert_eq!(p.per_processor_misses[1], (k * (c + 1)) as u64);
        assert_eq!(p.per_processor_misses[0], c as u64);
    }

    #[test]
    fn amplified_quadratic() {
        for k in [2, 4] {
            let case = gen_ff_amplified(k).unwrap();
            assert!(validate(&case.dag).is_valid());
            let (seq, par) = run(&case);
            let dev = count_deviations(&case.dag, &seq, &par).unwrap();
            assert!(dev.touch_deviations >= (k * k) as usize, "k={k} {dev:?}");
        }
    }

    #[test]
    fn full_tree() {
        let case = gen_ff_full(4, 4, false, 2).unwrap();
        assert!(validate(&case.dag).is_valid());
        let (seq, par) = run(&case);
        let dev = count_deviations(&case.dag, &seq, &par).unwrap();
        assert!(dev.touch_deviations >= 64, "{dev:?}");
    }
}

//! Lower-bound DAGs for the parent-first policy.
//!
//! A cascade block starts at a fork `u` whose future `s` is touched by `v`
//! near the end. In between, forks `x_1..x_n` spawn threads `Z_i` reading
//! `C` memory blocks, which are joined in reverse by `y_n..y_1`, each
//! reading block `C+1`. If `s` is still pending when `g` (the node before
//! `v`) finishes, the processor drains all `Z_i` before any `y_i` and
//! misses about `C+1` times. If `s` already ran, `Z_i` and `y_i`
//! alternate and every access misses.
//!
//! Whether `s` ran early is decided by a parity chain in front of the
//! block: fork `u_i` spawns `s_{i+1}` and continues to `v_i`, which
//! touches `s_i`. A stall at `v_i` pops two futures and flips the chain's
//! phase, so one early execution of `s_1` flips every later step.

use serde_json::json;

use super::{require, GeneratedCase};
use crate::dag::{DagBuilder, NodeId};
use crate::sched::{Directive, ForkPolicy, ScheduleScript, WakeCondition};
use crate::Result;

struct Segment {
    first: NodeId,
    last: NodeId,
    /// Future spawned by the block's `s` and left for the next segment.
    carry: Option<NodeId>,
}

/// Memory block read at step `j` (1-based) of a scan.
fn scan_block(c: u32, j: u32, ascending: bool) -> u32 {
    if ascending {
        j
    } else {
        c + 1 - j
    }
}

struct SegmentSpec<'a> {
    k: usize,
    n: usize,
    c: u32,
    ascending: bool,
    spawn_carry: bool,
    /// Landmark prefixes for the chain and for the block.
    chain_prefix: &'a str,
    prefix: &'a str,
    /// Inserts a plain node between the chain and `x_1`.
    spacer: bool,
}

/// Builds a parity chain of `k` steps followed by a cascade block. The
/// chain touches `carrier` first; it must already be pending.
fn build_segment(b: &mut DagBuilder, carrier: NodeId, spec: &SegmentSpec) -> Segment {
    let SegmentSpec {
        k,
        n,
        c,
        ascending,
        spawn_carry,
        chain_prefix,
        prefix,
        spacer,
    } = *spec;
    let mark = |b: &mut DagBuilder, name: String, id: NodeId| b.mark(format!("{prefix}{name}"), id);
    let mark_chain =
        |b: &mut DagBuilder, name: String, id: NodeId| b.mark(format!("{chain_prefix}{name}"), id);

    let mut pending = carrier;
    let mut first = None;
    let mut prev: Option<NodeId> = None;
    for i in 1..=k {
        let u = b.node();
        let s_next = b.node();
        let w = b.node();
        let v = b.node();
        b.future(u, s_next);
        b.cont(u, w);
        b.cont(w, v);
        b.touch(pending, v);
        if let Some(p) = prev {
            b.cont(p, u);
        }
        first.get_or_insert(u);
        mark_chain(b, format!("u_{i}"), u);
        mark_chain(b, format!("s_{}", i + 1), s_next);
        mark_chain(b, format!("w_{i}"), w);
        mark_chain(b, format!("v_{i}"), v);
        pending = s_next;
        prev = Some(v);
    }
    let s = pending;
    let mut prev = prev.expect("k >= 1");
    if spacer {
        let u4 = b.node();
        b.cont(prev, u4);
        mark(b, "u_4".into(), u4);
        prev = u4;
    }

    let first_block = Some(scan_block(c, 1, ascending));
    let mut zs_last = Vec::with_capacity(n);
    for i in 1..=n {
        let x = b.node_with_block(first_block);
        b.cont(prev, x);
        let z0 = b.node_with_block(first_block);
        b.future(x, z0);
        let rest: Vec<Option<u32>> = (2..=c).map(|j| Some(scan_block(c, j, ascending))).collect();
        let z = b.chain_after(z0, &rest);
        let z_last = z.last().copied().unwrap_or(z0);
        zs_last.push(z_last);
        mark(b, format!("x_{i}"), x);
        mark(b, format!("Z_{i}_first"), z0);
        mark(b, format!("Z_{i}_last"), z_last);
        prev = x;
    }
    let g = b.node();
    b.cont(prev, g);
    let v = b.node();
    b.cont(g, v);
    mark(b, "g".into(), g);
    mark(b, "v".into(), v);

    let carry = if spawn_carry {
        let f = b.node();
        let s2 = b.node();
        b.future(s, f);
        b.cont(s, s2);
        b.touch(s2, v);
        mark(b, "f".into(), f);
        Some(f)
    } else {
        b.touch(s, v);
        None
    };

    let mut prev = v;
    for i in (1..=n).rev() {
        let y = b.node_with_block(Some(c + 1));
        b.cont(prev, y);
        b.join(zs_last[i - 1], y);
        mark(b, format!("y_{i}"), y);
        prev = y;
    }
    Segment {
        first: first.expect("k >= 1"),
        last: prev,
        carry,
    }
}

/// Root fork whose future `s_1` a thief may take.
fn start(b: &mut DagBuilder) -> (NodeId, NodeId) {
    let r = b.node();
    let s1 = b.node();
    b.future(r, s1);
    b.mark("r", r);
    b.mark("s_1", s1);
    (r, s1)
}

/// Processor 1 steals `s_1` right after the root runs, executes it and
/// sleeps for the rest of the run.
fn flip_script() -> ScheduleScript {
    let mut script = ScheduleScript::seeded(0);
    script.push(1, Directive::StealFrom { victim: 0 });
    script.push(1, Directive::Execute { count: 1 });
    script.push(
        1,
        Directive::Sleep {
            until: WakeCondition::Forever,
        },
    );
    script
}

fn check_sizes(n: i64, c: i64) -> Result<()> {
    require(n >= 1, format!("n must be >= 1, got {n}"))?;
    require(
        (2..=1 << 16).contains(&c),
        format!("C must be in 2..=65536, got {c}"),
    )
}

/// Parity chain of `k` steps ending in one cascade block. The sequential
/// run leaves the block's `s` pending and stays cheap; the scripted
/// one-steal run inverts the chain and pays the cascade.
pub fn gen_pf_parity_chain(k: i64, n: i64, c: i64) -> Result<GeneratedCase> {
    require(
        k >= 2 && k % 2 == 0,
        format!("k must be even and >= 2, got {k}"),
    )?;
    check_sizes(n, c)?;
    let mut b = DagBuilder::new();
    let (r, s1) = start(&mut b);
    let seg = build_segment(
        &mut b,
        s1,
        &SegmentSpec {
            k: k as usize,
            n: n as usize,
            c: c as u32,
            ascending: true,
            spawn_carry: false,
            chain_prefix: "",
            prefix: "",
            spacer: false,
        },
    );
    b.cont(r, seg.first);
    let dag = b.build(r, seg.last)?;
    Ok(GeneratedCase {
        dag,
        script_hint: flip_script(),
        processors: 2,
        policy: ForkPolicy::ParentFirst,
        params: json!({"family": "pf-parity-chain", "k": k, "n": n, "C": c, "touches": k + 1}),
    })
}

/// One cascade block `u_1..u_4, x_1..x_n, g, v, y_n..y_1` behind a
/// two-step chain (landmarks `pre.*`) that settles `u_3`'s future parent
/// before `u_3` is reached. Sequentially `s` is still pending at `g`;
/// in the scripted run it has already run.
pub fn gen_pf_cascade_block(n: i64, c: i64) -> Result<GeneratedCase> {
    check_sizes(n, c)?;
    let mut b = DagBuilder::new();
    let (r, s1) = start(&mut b);
    let seg = build_segment(
        &mut b,
        s1,
        &SegmentSpec {
            k: 2,
            n: n as usize,
            c: c as u32,
            ascending: true,
            spawn_carry: false,
            chain_prefix: "pre.",
            prefix: "",
            spacer: true,
        },
    );
    b.cont(r, seg.first);
    for (alias, name) in [
        ("u_1", "pre.u_2"),
        ("u_2", "pre.w_2"),
        ("u_3", "pre.v_2"),
        ("s", "pre.s_3"),
    ] {
        let id = b.landmark(name).expect("chain landmark");
        b.mark(alias, id);
    }
    let dag = b.build(r, seg.last)?;
    Ok(GeneratedCase {
        dag,
        script_hint: flip_script(),
        processors: 2,
        policy: ForkPolicy::ParentFirst,
        params: json!({"family": "pf-cascade-block", "n": n, "C": c, "touches": 3}),
    })
}

/// `t` chained segments of two chain steps and one cascade block each.
/// Each block's `s` spawns the carrier future for the next chain, so the
/// phase set by the single steal survives from block to block. Blocks
/// alternate their scan direction, which keeps the sequential run at two
/// misses per block after the first.
pub fn gen_pf_full(t: i64, n: i64, c: i64) -> Result<GeneratedCase> {
    require(
        t >= 1 && (t as u64).is_power_of_two(),
        format!("t must be a power of two, got {t}"),
    )?;
    check_sizes(n, c)?;
    let t = t as usize;
    let mut b = DagBuilder::new();
    let (r, s1) = start(&mut b);
    let mut carrier = s1;
    let mut prev = r;
    for seg_idx in 0..t {
        let prefix = if t == 1 {
            String::new()
        } else {
            format!("P{}.", seg_idx + 1)
        };
        let seg = build_segment(
            &mut b,
            carrier,
            &SegmentSpec {
                k: 2,
                n: n as usize,
                c: c as u32,
                ascending: seg_idx % 2 == 0,
                spawn_carry: seg_idx + 1 < t,
                chain_prefix: &prefix,
                prefix: &prefix,
                spacer: false,
            },
        );
        b.cont(prev, seg.first);
        prev = seg.last;
        if let Some(f) = seg.carry {
            carrier = f;
        }
    }
    let dag = b.build(r, prev)?;
    Ok(GeneratedCase {
        dag,
        script_hint: flip_script(),
        processors: 2,
        policy: ForkPolicy::ParentFirst,
        params: json!({"family": "pf-full", "t": t, "n": n, "C": c, "touches": 3 * t}),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{simulate_cache, CacheConfig};
    use crate::dag::{classify, validate};
    use crate::sched::{count_deviations, run_parallel, run_sequential};

    fn misses(case: &GeneratedCase, c: usize) -> (u64, u64, usize, usize) {
        let seq = run_sequential(&case.dag, case.policy).unwrap();
        let par = run_parallel(&case.dag, case.policy, case.processors, &case.script_hint).unwrap();
        let cfg = CacheConfig::new(c).unwrap();
        let s = simulate_cache(&seq, &case.dag, cfg).unwrap().total_misses;
        let p = simulate_cache(&par, &case.dag, cfg).unwrap().total_misses;
        let dev = count_deviations(&case.dag, &seq, &par).unwrap().count;
        (s, p, dev, par.steal_count)
    }

    #[test]
    fn parity_chain_costs() {
        for k in [2, 6] {
            let case = gen_pf_parity_chain(k, 8, 4).unwrap();
            assert!(validate(&case.dag).is_valid());
            assert!(classify(&case.dag).unwrap().is_single_touch);
            let (s, p, dev, steals) = misses(&case, 4);
            assert_eq!(s, 5, "k={k}");
            assert!(p >= 8 * 4, "k={k} p={p}");
            assert!(dev >= 8);
            assert_eq!(steals, 1);
        }
        assert!(gen_pf_parity_chain(3, 8, 4).is_err());
        assert!(gen_pf_parity_chain(2, 8, 1).is_err());
    }

    #[test]
    fn cascade_block_landmarks_and_costs() {
        let case = gen_pf_cascade_block(16, 4).unwrap();
        for name in [
            "u_1", "u_2", "u_3", "u_4", "s", "v", "g", "x_1", "x_16", "y_1", "y_16", "Z_3_last",
        ] {
            case.node(name);
        }
        assert_eq!(crate::dag::count_touches(&case.dag).unwrap(), 3);
        let (s, p, _, _) = misses(&case, 4);
        assert!(s <= 4 + 2, "s={s}");
        assert!(p >= 3 * 15 + 4, "p={p}");
    }

    #[test]
    fn full_keeps_phase_across_blocks() {
        let (t, n, c) = (8i64, 8i64, 4i64);
        let case = gen_pf_full(t, n, c).unwrap();
        assert!(validate(&case.dag).is_valid());
        assert!(classify(&case.dag).unwrap().is_single_touch);
        assert_eq!(
            crate::dag::count_touches(&case.dag).unwrap(),
            3 * t as usize
        );
        let (s, p, dev, steals) = misses(&case, c as usize);
        assert_eq!(steals, 1);
        assert_eq!(s, (c + 2 * t - 1) as u64);
        assert!(dev as i64 >= t * n / 4, "dev={dev}");
        assert!(p as i64 >= c * t * n / 4, "p={p}");
    }

    #[test]
    fn single_segment_matches_parity_chain() {
        assert!(gen_pf_full(3, 5, 3).is_err());
        let a = gen_pf_full(1, 5, 3).unwrap();
        let b = gen_pf_parity_chain(2, 5, 3).unwrap();
        assert_eq!(a.dag.content_hash(), b.dag.content_hash());
    }
}

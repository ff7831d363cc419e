use wsdag::cache::{simulate_cache, CacheConfig};
use wsdag::dag::{classify, count_touches, decompose_threads, validate, Dag, NodeId};
use wsdag::generators::*;
use wsdag::sched::{count_deviations, run_parallel, run_sequential, ExecutionTrace};

fn replay(case: &GeneratedCase) -> (ExecutionTrace, ExecutionTrace) {
    let seq = run_sequential(&case.dag, case.policy).unwrap();
    let par = run_parallel(&case.dag, case.policy, case.processors, &case.script_hint).unwrap();
    (seq, par)
}

fn misses(dag: &Dag, trace: &ExecutionTrace, c: usize) -> u64 {
    simulate_cache(trace, dag, CacheConfig::new(c).unwrap())
        .unwrap()
        .total_misses
}

#[test]
fn no_forks_gives_a_chain() {
    let cfg = RandomDagConfig {
        seed: 1,
        fork_probability: 0.0,
        ..RandomDagConfig::default()
    };
    let case = gen_random_structured(Discipline::SingleTouch, &cfg).unwrap();
    assert_eq!(count_touches(&case.dag).unwrap(), 0);
    assert_eq!(decompose_threads(&case.dag).unwrap().len(), 1);
    assert!(case.dag.nodes().iter().all(|n| !case.dag.is_fork(n.id)));
}

#[test]
fn deep_random_dags_land_in_their_family() {
    let cfg = RandomDagConfig {
        seed: 42,
        max_depth: 6,
        ..RandomDagConfig::default()
    };
    let single = gen_random_structured(Discipline::SingleTouch, &cfg).unwrap();
    let class = classify(&single.dag).unwrap();
    assert!(class.is_structured && class.is_single_touch);
    let local = gen_random_structured(Discipline::LocalTouch, &cfg).unwrap();
    let class = classify(&local.dag).unwrap();
    assert!(class.is_structured && class.is_local_touch);
}

#[test]
fn local_touch_produces_multi_touch_threads() {
    let found = (0..100).any(|seed| {
        let case =
            gen_random_structured(Discipline::LocalTouch, &RandomDagConfig::seeded(seed)).unwrap();
        let dag = &case.dag;
        decompose_threads(dag).unwrap().iter().skip(1).any(|t| {
            t.node_chain
                .iter()
                .map(|&n| dag.touch_targets(n).count())
                .sum::<usize>()
                >= 2
        })
    });
    assert!(found);
}

#[test]
fn ff_block_thief_runs_the_fork_spine() {
    let case = gen_ff_block(4, true, 2).unwrap();
    let (_, par) = replay(&case);
    let thief = &par.per_processor()[1];
    let mut want: Vec<NodeId> = Vec::new();
    for i in 1..=4 {
        for name in ["u", "x", "Y"] {
            match name {
                "Y" => {
                    let (a, b) = (
                        case.node(&format!("Y_{i}_first")),
                        case.node(&format!("Y_{i}_last")),
                    );
                    want.extend((a.0..=b.0).map(NodeId));
                }
                _ => want.push(case.node(&format!("{name}_{i}"))),
            }
        }
    }
    assert_eq!(thief, &want);
}

#[test]
fn ff_block_deviations() {
    for k in [1, 4, 8] {
        let case = gen_ff_block(k, false, 2).unwrap();
        let (seq, par) = replay(&case);
        let dev = count_deviations(&case.dag, &seq, &par).unwrap();
        let mut touches = dev.touch_nodes(&case.dag);
        touches.sort();
        let mut want: Vec<_> = (1..=k).map(|i| case.node(&format!("s_{i}"))).collect();
        want.sort();
        assert_eq!(touches, want, "k={k}");
        assert_eq!(dev.count, 2 * k as usize);
    }
}

#[test]
fn ff_block_cache_counts() {
    let case = gen_ff_block(8, true, 4).unwrap();
    let (seq, par) = replay(&case);
    let cfg = CacheConfig::new(4).unwrap();
    let s = simulate_cache(&seq, &case.dag, cfg).unwrap();
    let p = simulate_cache(&par, &case.dag, cfg).unwrap();
    assert!(s.total_misses <= 20, "{}", s.total_misses);
    assert!(p.per_processor_misses[1] >= 28);
    assert!(p.per_processor_misses[0] <= 4);
}

#[test]
fn ff_amplified_scales_quadratically() {
    let touch_devs = |k| {
        let case = gen_ff_amplified(k).unwrap();
        let (seq, par) = replay(&case);
        count_deviations(&case.dag, &seq, &par)
            .unwrap()
            .touch_deviations
    };
    let (d4, d8) = (touch_devs(4), touch_devs(8));
    assert!(d4 >= 16 && d8 >= 64);
    let ratio = d8 as f64 / d4 as f64;
    assert!((3.5..=4.5).contains(&ratio), "{d4} {d8}");
}

#[test]
fn ff_full_structure() {
    let case = gen_ff_full(2, 2, false, 2).unwrap();
    let dag = &case.dag;
    assert!(validate(dag).is_valid());
    let forks = dag.nodes().iter().filter(|n| dag.is_fork(n.id)).count();
    assert_eq!(decompose_threads(dag).unwrap().len(), 1 + forks);
    assert!(dag.landmark("S_1").is_some() && dag.landmark("S_2").is_some());
    assert!(dag.landmark("tree_fork_1").is_some());

    let case = gen_ff_full(2, 3, false, 2).unwrap();
    assert!(classify(&case.dag).unwrap().is_single_touch);
}

#[test]
fn ff_full_smallest_case() {
    let case = gen_ff_full(1, 2, false, 2).unwrap();
    let (seq, par) = replay(&case);
    assert!(count_deviations(&case.dag, &seq, &par).unwrap().count >= 4);
}

#[test]
fn ff_generators_reject_bad_sizes() {
    assert!(gen_ff_block(0, false, 2).is_err());
    assert!(gen_ff_full(3, 2, false, 2).is_err());
    assert!(gen_pf_parity_chain(3, 2, 2).is_err());
    assert!(gen_pf_parity_chain(2, 2, 1).is_err());
    assert!(gen_pf_full(3, 2, 2).is_err());
}

#[test]
fn pf_full_uses_one_steal() {
    let case = gen_pf_full(4, 4, 2).unwrap();
    let (_, par) = replay(&case);
    assert_eq!(par.steal_count, 1);
}

#[test]
fn pf_full_scales_linearly_in_t() {
    let par_misses = |t| {
        let case = gen_pf_full(t, 4, 2).unwrap();
        let (_, par) = replay(&case);
        misses(&case.dag, &par, 2)
    };
    let (a, b) = (par_misses(4), par_misses(8));
    let ratio = b as f64 / a as f64;
    assert!((1.6..=2.4).contains(&ratio), "{a} {b}");
}

#[test]
fn pf_sequential_misses_stay_small() {
    for (t, c) in [(1, 2), (2, 4), (4, 4), (8, 8)] {
        let case = gen_pf_full(t, 8, c).unwrap();
        let (seq, _) = replay(&case);
        assert_eq!(
            misses(&case.dag, &seq, c as usize),
            (c + 2 * t - 1) as u64,
            "t={t} C={c}"
        );
    }
}

#[test]
fn cascade_block_deviates_every_y() {
    let case = gen_pf_cascade_block(8, 4).unwrap();
    let (seq, par) = replay(&case);
    let dev = count_deviations(&case.dag, &seq, &par).unwrap();
    for i in 1..=8 {
        assert!(dev.contains(case.node(&format!("y_{i}"))), "y_{i}");
    }
    let case = gen_pf_cascade_block(16, 4).unwrap();
    let (seq, par) = replay(&case);
    assert!(misses(&case.dag, &seq, 4) <= 6);
    assert!(misses(&case.dag, &par, 4) >= 49);
}

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use wsdag::cache::{simulate_cache, CacheConfig};
use wsdag::dag::{classify, compute_span, decompose_threads, validate, Dag, EdgeKind};
use wsdag::experiments::{check_lemma2, Status};
use wsdag::generators::{gen_random_structured, Discipline, RandomDagConfig};
use wsdag::sched::{
    count_deviations, kind_of, run_parallel, run_sequential, DeviationKind, Event, ForkPolicy,
    ScheduleScript,
};

/// Longest path in nodes by repeated edge relaxation; independent of any
/// topological ordering.
fn relaxation_span(dag: &Dag) -> usize {
    let mut best = vec![0usize; dag.len()];
    best[dag.root().0] = 1;
    for _ in 0..dag.len() {
        let mut changed = false;
        for e in dag.edges() {
            if best[e.from.0] > 0 && best[e.from.0] + 1 > best[e.to.0] {
                best[e.to.0] = best[e.from.0] + 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    best[dag.final_node().0]
}

fn discipline() -> impl Strategy<Value = Discipline> {
    prop::sample::select(Discipline::ALL.to_vec())
}

fn config() -> impl Strategy<Value = RandomDagConfig> {
    (
        any::<u64>(),
        0u32..5,
        1u32..8,
        0.0f64..0.7,
        1u32..12,
        0.0f64..=1.0,
    )
        .prop_map(
            |(
                seed,
                max_depth,
                max_thread_len,
                fork_probability,
                block_universe,
                block_probability,
            )| {
                RandomDagConfig {
                    seed,
                    max_depth,
                    max_thread_len,
                    fork_probability,
                    block_universe,
                    block_probability,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn span_matches_relaxation_oracle(d in discipline(), cfg in config()) {
        let case = gen_random_structured(d, &cfg).unwrap();
        prop_assert_eq!(compute_span(&case.dag).unwrap(), relaxation_span(&case.dag));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_dags_validate_and_classify(d in discipline(), cfg in config()) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let first = validate(&case.dag);
        prop_assert!(first.is_valid(), "{}", first);
        prop_assert_eq!(first, validate(&case.dag));
        let class = classify(&case.dag).unwrap();
        prop_assert!(!class.is_single_touch || class.is_structured);
        prop_assert!(!class.is_local_touch || class.is_structured);
        let ok = match d {
            Discipline::Structured => class.is_structured,
            Discipline::SingleTouch => class.is_single_touch,
            Discipline::LocalTouch => class.is_local_touch,
            Discipline::SuperFinal => class.is_single_touch_super_final,
        };
        prop_assert!(ok, "{:?}", class.violations);
    }

    #[test]
    fn threads_partition_nodes(d in discipline(), cfg in config()) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let dag = &case.dag;
        let threads = decompose_threads(dag).unwrap();
        let mut seen = HashSet::new();
        let mut chain_edges = HashSet::new();
        for t in &threads {
            for &n in &t.node_chain {
                prop_assert!(seen.insert(n), "node {} in two threads", n);
            }
            for w in t.node_chain.windows(2) {
                chain_edges.insert((w[0], w[1]));
            }
        }
        prop_assert_eq!(seen.len(), dag.len());
        let cont: HashSet<_> = dag
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Continuation)
            .map(|e| (e.from, e.to))
            .collect();
        prop_assert_eq!(chain_edges, cont);
        let main = &threads[0];
        prop_assert_eq!(main.first(), dag.root());
        prop_assert_eq!(main.last(), dag.final_node());
        for t in &threads[1..] {
            let fork = t.fork_node.unwrap();
            prop_assert_eq!(dag.fork_children(fork).unwrap().0, t.first());
        }
    }

    #[test]
    fn json_roundtrip_preserves_hash(d in discipline(), cfg in config()) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let back = Dag::from_json(&case.dag.to_json()).unwrap();
        prop_assert_eq!(back.content_hash(), case.dag.content_hash());
        prop_assert_eq!(back.to_json(), case.dag.to_json());
    }

    #[test]
    fn generation_is_deterministic(d in discipline(), cfg in config()) {
        let a = gen_random_structured(d, &cfg).unwrap();
        let b = gen_random_structured(d, &cfg).unwrap();
        prop_assert_eq!(a.dag.to_json(), b.dag.to_json());
    }

    #[test]
    fn parallel_runs_are_safe_and_deterministic(
        d in discipline(),
        cfg in config(),
        procs in 1usize..6,
        steal_seed in any::<u64>(),
        parent_first in any::<bool>(),
    ) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let policy = if parent_first { ForkPolicy::ParentFirst } else { ForkPolicy::FutureFirst };
        let script = ScheduleScript::seeded(steal_seed);
        let a = run_parallel(&case.dag, policy, procs, &script).unwrap();
        a.check_against(&case.dag).unwrap();
        let b = run_parallel(&case.dag, policy, procs, &script).unwrap();
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());

        // Deque discipline: pops come from the owner's bottom, steals from
        // the victim's top.
        let mut deques: Vec<std::collections::VecDeque<_>> = vec![Default::default(); procs];
        for e in &a.events {
            match e.event {
                Event::Pushed { node } => deques[e.processor].push_back(node),
                Event::Popped { node } => prop_assert_eq!(deques[e.processor].pop_back(), Some(node)),
                Event::Stole { node, victim } => prop_assert_eq!(deques[victim].pop_front(), Some(node)),
                _ => {}
            }
        }

        let seq = run_sequential(&case.dag, policy).unwrap();
        let dev = count_deviations(&case.dag, &seq, &a).unwrap();
        prop_assert_eq!(dev.other_deviations, 0);
        for &n in &dev.deviations {
            prop_assert_ne!(kind_of(&case.dag, n), DeviationKind::Other);
        }
        if procs == 1 {
            prop_assert_eq!(dev.count, 0);
            prop_assert_eq!(a.execution_order(), seq.execution_order());
        }
    }

    #[test]
    fn lru_misses_shrink_as_cache_grows(d in discipline(), cfg in config(), c in 1usize..10) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let seq = run_sequential(&case.dag, ForkPolicy::FutureFirst).unwrap();
        let small = simulate_cache(&seq, &case.dag, CacheConfig::new(c).unwrap()).unwrap();
        let large = simulate_cache(&seq, &case.dag, CacheConfig::new(c + 1).unwrap()).unwrap();
        prop_assert!(large.total_misses <= small.total_misses);

        let distinct: HashSet<_> = case.dag.nodes().iter().filter_map(|n| n.block).collect();
        prop_assert!(small.total_misses as usize >= distinct.len());
        let accesses: u64 = small.per_processor_accesses.iter().sum();
        prop_assert!(small.total_misses <= accesses);
    }

    #[test]
    fn parallel_cold_misses_cover_blocks_per_processor(
        d in discipline(),
        cfg in config(),
        procs in 2usize..5,
        c in 1usize..6,
    ) {
        let case = gen_random_structured(d, &cfg).unwrap();
        let par = run_parallel(&case.dag, ForkPolicy::FutureFirst, procs, &ScheduleScript::seeded(cfg.seed)).unwrap();
        let report = simulate_cache(&par, &case.dag, CacheConfig::new(c).unwrap()).unwrap();
        let mut per_proc: HashMap<usize, HashSet<u32>> = HashMap::new();
        for e in &par.events {
            if let Event::Executed { node } = e.event {
                if let Some(b) = case.dag.node(node).block {
                    per_proc.entry(e.processor).or_default().insert(b.0);
                }
            }
        }
        for (p, blocks) in per_proc {
            prop_assert!(report.per_processor_misses[p] as usize >= blocks.len());
        }
        prop_assert_eq!(report.total_misses, report.per_processor_misses.iter().sum::<u64>());
    }

    #[test]
    fn steal_or_deviated_touch_holds(cfg in config(), procs in 2usize..6, steal_seed in any::<u64>()) {
        let case = gen_random_structured(Discipline::SingleTouch, &cfg).unwrap();
        let r = check_lemma2(&case.dag, procs, &ScheduleScript::seeded(steal_seed)).unwrap();
        prop_assert_eq!(r.status, Status::Pass, "{:?}", r.tolerance_notes);
    }
}

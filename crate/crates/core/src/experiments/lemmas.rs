use std::collections::HashSet;

use serde_json::json;

use super::ExperimentResult;
use crate::dag::{classify, compute_span, count_touches, Dag, NodeId, ThreadMap};
use crate::generators::gen_pf_parity_chain;
use crate::sched::{
    count_deviations, run_parallel, run_sequential, ExecutionTrace, ForkPolicy, ScheduleScript,
};
use crate::Result;

/// Which family the sequential-order property is checked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma1Variant {
    SingleTouch,
    LocalTouch,
    SuperFinal,
}

impl Lemma1Variant {
    fn experiment_name(self) -> &'static str {
        match self {
            Lemma1Variant::SingleTouch => "lemma1",
            Lemma1Variant::LocalTouch => "lemma3",
            Lemma1Variant::SuperFinal => "lemma1-super-final",
        }
    }

    fn family(self) -> &'static str {
        match self {
            Lemma1Variant::SingleTouch => "single-touch",
            Lemma1Variant::LocalTouch => "local-touch",
            Lemma1Variant::SuperFinal => "single-touch with a super final node",
        }
    }
}

fn positions(dag: &Dag, trace: &ExecutionTrace) -> Vec<usize> {
    let mut pos = vec![usize::MAX; dag.len()];
    for (i, n) in trace.execution_order().into_iter().enumerate() {
        pos[n.0] = i;
    }
    pos
}

/// Violations of the sequential-order property in `seq`:
/// every future parent runs before the local parent of its touch, and a
/// fork's right child runs right after the spawned thread's last node.
pub(crate) fn lemma1_violations(dag: &Dag, seq: &ExecutionTrace) -> Vec<String> {
    let pos = positions(dag, seq);
    let threads = ThreadMap::build_unchecked(dag);
    let mut out = Vec::new();
    for node in dag.nodes() {
        let x = node.id;
        if let Some(lp) = dag.local_parent(x) {
            for fp in dag.future_parents(x) {
                if pos[lp.0] < pos[fp.0] {
                    out.push(format!(
                        "local parent {lp} of touch {x} ran before future parent {fp}"
                    ));
                }
            }
        }
        if let Some((_, right)) = dag.fork_children(x) {
            let last = threads
                .spawned_by(dag, x)
                .expect("fork spawns a thread")
                .last();
            if pos[right.0] != pos[last.0] + 1 {
                out.push(format!(
                    "right child {right} of fork {x} does not follow thread end {last}"
                ));
            }
        }
    }
    out
}

/// Sequential-order property on a single-touch DAG.
pub fn check_lemma1(dag: &Dag) -> Result<ExperimentResult> {
    check_lemma1_with(dag, Lemma1Variant::SingleTouch)
}

pub fn check_lemma1_with(dag: &Dag, variant: Lemma1Variant) -> Result<ExperimentResult> {
    let params = json!({"dag_hash": dag.content_hash(), "family": variant.family()});
    let mut result = ExperimentResult::new(variant.experiment_name(), params);
    let class = classify(dag)?;
    let admitted = match variant {
        Lemma1Variant::SingleTouch => class.is_single_touch,
        Lemma1Variant::LocalTouch => class.is_local_touch,
        Lemma1Variant::SuperFinal => class.is_single_touch_super_final,
    };
    if !admitted {
        return Ok(result.skip(format!("not {}", variant.family())));
    }
    let seq = run_sequential(dag, ForkPolicy::FutureFirst)?;
    let violations = lemma1_violations(dag, &seq);
    result.measured.span = Some(compute_span(dag)? as u64);
    result.measured.touches = Some(count_touches(dag)? as u64);
    result
        .measured
        .extra
        .insert("violations".into(), violations.len() as i64);
    for v in violations.iter().take(5) {
        result.note(v.clone());
    }
    Ok(result.decide(violations.is_empty()))
}

/// Violations of the steal-or-deviated-touch property for one parallel
/// run: a fork whose right child deviated must have had that child stolen
/// or a touch on its spawned thread deviate.
pub(crate) fn lemma2_violations(
    dag: &Dag,
    seq: &ExecutionTrace,
    par: &ExecutionTrace,
) -> Result<(Vec<String>, usize)> {
    let dev = count_deviations(dag, seq, par)?;
    let stolen: HashSet<NodeId> = par.stolen_nodes().into_iter().collect();
    let threads = ThreadMap::build_unchecked(dag);
    let mut out = Vec::new();
    for node in dag.nodes() {
        let v = node.id;
        let Some((_, right)) = dag.fork_children(v) else {
            continue;
        };
        let spawned = threads.spawned_by(dag, v).expect("fork spawns a thread");
        let touch_deviated = spawned
            .node_chain
            .iter()
            .any(|&n| dag.is_sync_node(n) && dev.contains(n));
        if dev.contains(right) && !stolen.contains(&right) && !touch_deviated {
            out.push(format!(
                "fork {v}: right child {right} deviated without a steal or deviated touch"
            ));
        }
    }
    Ok((out, dev.count))
}

/// Steal-or-deviated-touch property on one parallel run of a
/// single-touch DAG.
pub fn check_lemma2(dag: &Dag, procs: usize, script: &ScheduleScript) -> Result<ExperimentResult> {
    let params = json!({
        "dag_hash": dag.content_hash(),
        "procs": procs,
        "script_hash": script.content_hash(),
    });
    let mut result = ExperimentResult::new("lemma2", params);
    if !classify(dag)?.is_single_touch {
        return Ok(result.skip("not single-touch"));
    }
    let seq = run_sequential(dag, ForkPolicy::FutureFirst)?;
    let par = run_parallel(dag, ForkPolicy::FutureFirst, procs, script)?;
    let (violations, deviations) = lemma2_violations(dag, &seq, &par)?;
    result.measured.deviations = Some(deviations as u64);
    result.measured.steals = Some(par.steal_count as u64);
    result
        .measured
        .extra
        .insert("violations".into(), violations.len() as i64);
    for v in violations.iter().take(5) {
        result.note(v.clone());
    }
    Ok(result.decide(violations.is_empty()))
}

/// For each chain step `i`, whether `w_i` ran before `s_i`.
fn w_before_s(
    case: &crate::generators::GeneratedCase,
    trace: &ExecutionTrace,
    k: usize,
) -> Vec<bool> {
    let pos = positions(&case.dag, trace);
    (1..=k)
        .map(|i| pos[case.node(&format!("w_{i}")).0] < pos[case.node(&format!("s_{i}")).0])
        .collect()
}

/// Parity chain of length `k`: sequentially `w_i` precedes `s_i` exactly
/// for odd `i`; the one-steal run inverts this at every `i`.
pub fn check_parity_law(k: i64, n: i64, c: i64) -> Result<ExperimentResult> {
    let case = gen_pf_parity_chain(k, n, c)?;
    let mut result = ExperimentResult::new("parity", json!({"k": k, "n": n, "C": c}));
    let seq = run_sequential(&case.dag, case.policy)?;
    let par = run_parallel(&case.dag, case.policy, case.processors, &case.script_hint)?;
    let k = k as usize;
    let seq_order = w_before_s(&case, &seq, k);
    let par_order = w_before_s(&case, &par, k);
    let mut bad = 0;
    for i in 1..=k {
        let odd = i % 2 == 1;
        if seq_order[i - 1] != odd {
            bad += 1;
            result.note(format!("sequential order wrong at i={i}"));
        }
        if par_order[i - 1] == odd {
            bad += 1;
            result.note(format!("parallel order not inverted at i={i}"));
        }
    }
    let dev = count_deviations(&case.dag, &seq, &par)?;
    result.measured.deviations = Some(dev.count as u64);
    result.measured.steals = Some(par.steal_count as u64);
    result.measured.extra.insert("violations".into(), bad);
    Ok(result.decide(bad == 0))
}

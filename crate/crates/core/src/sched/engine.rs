//! Lockstep simulation of parsimonious work stealing.
//!
//! Time advances in steps. Within a step processors act in ascending id
//! order and each gets one turn. A turn executes one node (popping it from
//! the bottom of the own deque first if needed), makes one steal attempt,
//! or is spent asleep.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::script::{Directive, ScheduleScript, WakeCondition};
use super::trace::{Event, ExecutionTrace, TraceEvent, TraceHeader, RNG_NAME};
use super::ForkPolicy;
use crate::dag::{validate, Dag, EdgeKind, NodeId};
use crate::{Error, Result};

/// Steps without progress (and without timed sleepers) before a run is
/// declared stuck.
const STALL_LIMIT: u64 = 2_000;

#[derive(Debug, Clone)]
enum Sleep {
    Steps(u64),
    Until(Vec<NodeId>),
    Forever,
}

#[derive(Debug)]
struct Proc {
    current: Option<NodeId>,
    /// Front is the top (steal end), back is the bottom (owner end).
    deque: VecDeque<NodeId>,
    directives: Vec<Directive>,
    pc: usize,
    executed_in_directive: u32,
    sleep: Option<Sleep>,
}

impl Proc {
    fn holds_work(&self) -> bool {
        self.current.is_some() || !self.deque.is_empty()
    }
}

enum TurnOutcome {
    Executed,
    Stole,
    Other,
}

struct Sim<'a> {
    dag: &'a Dag,
    policy: ForkPolicy,
    procs: Vec<Proc>,
    remaining: Vec<usize>,
    done: Vec<bool>,
    done_count: usize,
    events: Vec<TraceEvent>,
    steals: usize,
    step: u64,
    rng: ChaCha8Rng,
}

impl<'a> Sim<'a> {
    fn emit(&mut self, processor: usize, event: Event) {
        self.events.push(TraceEvent {
            step: self.step,
            processor,
            event,
        });
    }

    fn script_err(&self, processor: usize, reason: impl Into<String>) -> Error {
        Error::Script {
            processor,
            step: self.step,
            reason: reason.into(),
        }
    }

    fn execute(&mut self, p: usize, node: NodeId) {
        assert!(
            !self.done[node.0] && self.remaining[node.0] == 0,
            "simulator tried to run node {node} before it was ready"
        );
        self.done[node.0] = true;
        self.done_count += 1;
        self.procs[p].executed_in_directive += 1;
        self.emit(p, Event::Executed { node });

        if let Some((left, right)) = self.dag.fork_children(node) {
            let (run, push) = match self.policy {
                ForkPolicy::FutureFirst => (left, right),
                ForkPolicy::ParentFirst => (right, left),
            };
            self.remaining[left.0] -= 1;
            self.remaining[right.0] -= 1;
            self.procs[p].deque.push_back(push);
            self.emit(p, Event::Pushed { node: push });
            self.procs[p].current = Some(run);
            return;
        }

        let mut cont_ready = None;
        let mut touch_ready = Vec::new();
        let outs: Vec<(NodeId, EdgeKind)> =
            self.dag.out_edges(node).map(|e| (e.to, e.kind)).collect();
        for (child, kind) in outs {
            self.remaining[child.0] -= 1;
            if self.remaining[child.0] == 0 {
                match kind {
                    EdgeKind::Continuation => cont_ready = Some(child),
                    _ => touch_ready.push(child),
                }
            }
        }
        // The processor completing a synchronization node's last parent
        // continues into it; the first arrival moves on.
        let mut next = cont_ready;
        for t in touch_ready {
            if next.is_none() {
                next = Some(t);
            } else {
                self.procs[p].deque.push_back(t);
                self.emit(p, Event::Pushed { node: t });
            }
        }
        self.procs[p].current = next;
    }

    fn steal(&mut self, p: usize, victim: usize) -> TurnOutcome {
        match self.procs[victim].deque.pop_front() {
            Some(node) => {
                self.steals += 1;
                self.procs[p].current = Some(node);
                self.emit(p, Event::Stole { node, victim });
                TurnOutcome::Stole
            }
            None => {
                self.emit(p, Event::FailedSteal { victim });
                TurnOutcome::Other
            }
        }
    }

    /// Execute own work, or make one random steal attempt.
    fn work(&mut self, p: usize) -> TurnOutcome {
        if let Some(node) = self.procs[p].current.take() {
            self.execute(p, node);
            return TurnOutcome::Executed;
        }
        if let Some(node) = self.procs[p].deque.pop_back() {
            self.emit(p, Event::Popped { node });
            self.execute(p, node);
            return TurnOutcome::Executed;
        }
        let n = self.procs.len();
        if n == 1 {
            self.emit(p, Event::Idle);
            return TurnOutcome::Other;
        }
        let pick = self.rng.gen_range(0..n - 1);
        let victim = if pick >= p { pick + 1 } else { pick };
        self.steal(p, victim)
    }

    fn advance(&mut self, p: usize) {
        self.procs[p].pc += 1;
        self.procs[p].executed_in_directive = 0;
    }

    fn turn(&mut self, p: usize) -> Result<TurnOutcome> {
        // Sleeping.
        if let Some(sleep) = self.procs[p].sleep.take() {
            match sleep {
                Sleep::Forever => {
                    self.procs[p].sleep = Some(Sleep::Forever);
                    return Ok(TurnOutcome::Other);
                }
                Sleep::Steps(0) => {}
                Sleep::Steps(k) => {
                    self.procs[p].sleep = Some(Sleep::Steps(k - 1));
                    return Ok(TurnOutcome::Other);
                }
                Sleep::Until(nodes) => {
                    if !nodes.iter().all(|n| self.done[n.0]) {
                        self.procs[p].sleep = Some(Sleep::Until(nodes));
                        return Ok(TurnOutcome::Other);
                    }
                }
            }
        }

        loop {
            let pc = self.procs[p].pc;
            let Some(directive) = self.procs[p].directives.get(pc).cloned() else {
                return Ok(self.work(p));
            };
            match directive {
                Directive::Wake => self.advance(p),
                Directive::Execute { count } => {
                    if self.procs[p].executed_in_directive >= count {
                        self.advance(p);
                        continue;
                    }
                    let out = self.work(p);
                    if self.procs[p].executed_in_directive >= count {
                        self.advance(p);
                    }
                    return Ok(out);
                }
                Directive::ExecuteUntil { node } => {
                    if self.done[node.0] {
                        self.advance(p);
                        continue;
                    }
                    let out = self.work(p);
                    if self.done[node.0] {
                        self.advance(p);
                    }
                    return Ok(out);
                }
                Directive::Sleep { until } => {
                    self.advance(p);
                    let state = match until {
                        WakeCondition::Steps(0) => continue,
                        WakeCondition::Steps(k) => Sleep::Steps(k - 1),
                        WakeCondition::Executed(nodes) => {
                            if nodes.iter().all(|n| self.done[n.0]) {
                                continue;
                            }
                            Sleep::Until(nodes)
                        }
                        WakeCondition::Forever => Sleep::Forever,
                    };
                    self.procs[p].sleep = Some(state);
                    self.emit(p, Event::Slept);
                    return Ok(TurnOutcome::Other);
                }
                Directive::StealFrom { victim } => {
                    if self.procs[p].holds_work() {
                        return Err(self.script_err(p, "steal directive while holding work"));
                    }
                    self.advance(p);
                    return Ok(self.steal(p, victim));
                }
                Directive::PopOwn => {
                    if self.procs[p].current.is_some() {
                        return Err(self.script_err(p, "pop directive while a node is current"));
                    }
                    let Some(node) = self.procs[p].deque.pop_back() else {
                        return Err(self.script_err(p, "pop directive on an empty deque"));
                    };
                    self.advance(p);
                    self.emit(p, Event::Popped { node });
                    self.execute(p, node);
                    return Ok(TurnOutcome::Executed);
                }
            }
        }
    }

    fn frontier(&self) -> Vec<usize> {
        (0..self.dag.len())
            .filter(|&i| !self.done[i] && self.dag.parents(NodeId(i)).any(|par| self.done[par.0]))
            .collect()
    }
}

/// Runs `dag` on `procs` virtual processors under `script`.
pub fn run_parallel(
    dag: &Dag,
    policy: ForkPolicy,
    procs: usize,
    script: &ScheduleScript,
) -> Result<ExecutionTrace> {
    let report = validate(dag);
    if !report.is_valid() {
        return Err(Error::InvalidDag(report));
    }
    if procs == 0 {
        return Err(Error::InvalidParam(
            "at least one processor is required".into(),
        ));
    }
    script.check(procs, dag.len())?;

    let n = dag.len();
    let seed = script.default.random_victim_seed;
    let mut sim = Sim {
        dag,
        policy,
        procs: (0..procs)
            .map(|id| Proc {
                current: None,
                deque: VecDeque::new(),
                directives: script.directives(id).to_vec(),
                pc: 0,
                executed_in_directive: 0,
                sleep: None,
            })
            .collect(),
        remaining: (0..n).map(|i| dag.in_degree(NodeId(i))).collect(),
        done: vec![false; n],
        done_count: 0,
        events: Vec::new(),
        steals: 0,
        step: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    sim.procs[0].current = Some(dag.root());

    let mut stalled = 0u64;
    'outer: loop {
        let mut progress = false;
        for p in 0..procs {
            match sim.turn(p)? {
                TurnOutcome::Executed | TurnOutcome::Stole => progress = true,
                TurnOutcome::Other => {}
            }
            if sim.done_count == n {
                break 'outer;
            }
        }
        sim.step += 1;

        let held = sim.procs.iter().any(Proc::holds_work);
        if !held {
            return Err(Error::Deadlock {
                step: sim.step,
                frontier: sim.frontier(),
            });
        }
        let timed_sleeper = sim
            .procs
            .iter()
            .any(|p| matches!(p.sleep, Some(Sleep::Steps(_))));
        if progress || timed_sleeper {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > STALL_LIMIT {
                return Err(Error::Deadlock {
                    step: sim.step,
                    frontier: sim.frontier(),
                });
            }
        }
    }

    Ok(ExecutionTrace {
        header: TraceHeader {
            dag_hash: dag.content_hash(),
            policy,
            processors: procs,
            script_hash: script.content_hash(),
            rng: RNG_NAME.to_string(),
            seed,
        },
        events: sim.events,
        total_steps: sim.step + 1,
        steal_count: sim.steals,
    })
}

/// Single-processor execution; identical to a one-processor parallel run
/// with an empty script.
pub fn run_sequential(dag: &Dag, policy: ForkPolicy) -> Result<ExecutionTrace> {
    run_parallel(dag, policy, 1, &ScheduleScript::default())
}

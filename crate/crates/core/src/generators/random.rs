//! Seeded random DAGs that satisfy a chosen touch discipline.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{require, GeneratedCase};
use crate::dag::{DagBuilder, NodeId};
use crate::sched::{ForkPolicy, ScheduleScript};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    /// Any touch pattern meeting the structured conditions: several touch
    /// points per thread and futures handed to later child threads.
    Structured,
    /// Every future thread is touched exactly once.
    SingleTouch,
    /// Touches happen in the forking thread, possibly several per future.
    LocalTouch,
    /// Single touch, except that some threads are touched by the final
    /// node instead.
    SuperFinal,
}

impl Discipline {
    pub const ALL: [Discipline; 4] = [
        Discipline::Structured,
        Discipline::SingleTouch,
        Discipline::LocalTouch,
        Discipline::SuperFinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Discipline::Structured => "structured",
            Discipline::SingleTouch => "single-touch",
            Discipline::LocalTouch => "local-touch",
            Discipline::SuperFinal => "super-final",
        }
    }

    fn multi_touch(self) -> bool {
        matches!(self, Discipline::Structured | Discipline::LocalTouch)
    }

    fn may_pass(self) -> bool {
        !matches!(self, Discipline::LocalTouch)
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Discipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Discipline::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown discipline {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDagConfig {
    pub seed: u64,
    /// Nesting depth of spawned threads below the main thread.
    pub max_depth: u32,
    /// Upper bound on the number of steps drawn for one thread body.
    pub max_thread_len: u32,
    pub fork_probability: f64,
    /// Memory blocks are drawn from `1..=block_universe`.
    pub block_universe: u32,
    pub block_probability: f64,
}

impl Default for RandomDagConfig {
    fn default() -> Self {
        RandomDagConfig {
            seed: 0,
            max_depth: 3,
            max_thread_len: 6,
            fork_probability: 0.35,
            block_universe: 8,
            block_probability: 0.8,
        }
    }
}

impl RandomDagConfig {
    pub fn seeded(seed: u64) -> Self {
        RandomDagConfig {
            seed,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        for (name, p) in [
            ("fork_probability", self.fork_probability),
            ("block_probability", self.block_probability),
        ] {
            require(
                (0.0..=1.0).contains(&p),
                format!("{name} must lie in [0, 1], got {p}"),
            )?;
        }
        require(self.max_thread_len >= 1, "max_thread_len must be >= 1")?;
        require(self.max_depth <= 12, "max_depth above 12 is too large")?;
        require(
            self.block_universe >= 1 || self.block_probability == 0.0,
            "block_universe must be >= 1 when blocks are drawn",
        )
    }
}

/// A spawned thread whose touch points are still owed a touch, in order.
#[derive(Debug)]
struct Pending {
    sources: VecDeque<NodeId>,
}

struct Gen<'a> {
    b: DagBuilder,
    rng: ChaCha8Rng,
    cfg: &'a RandomDagConfig,
    discipline: Discipline,
    /// Thread ends left for the final node.
    to_final: Vec<NodeId>,
}

impl Gen<'_> {
    fn fresh(&mut self) -> NodeId {
        let block = if self.rng.gen_bool(self.cfg.block_probability) {
            Some(self.rng.gen_range(1..=self.cfg.block_universe))
        } else {
            None
        };
        self.b.node_with_block(block)
    }

    /// Builds a thread body. Returns the first node, the last node and the touch points
    /// created in this thread; the last node is always a touch point of a
    /// spawned thread.
    fn body(
        &mut self,
        depth: u32,
        mut pending: Vec<Pending>,
        spawned: bool,
    ) -> (NodeId, NodeId, Vec<NodeId>) {
        let mut first = None;
        let mut last = None;
        let mut sources = Vec::new();
        // A fork's right child and a spawned thread's first node must not
        // be touches.
        let mut no_touch = true;
        let steps = self.rng.gen_range(1..=self.cfg.max_thread_len);

        let mut append = |g: &mut Self, node: NodeId, last: &mut Option<NodeId>| {
            if let Some(p) = *last {
                g.b.cont(p, node);
            }
            first.get_or_insert(node);
            *last = Some(node);
        };

        for _ in 0..steps {
            let can_fork = depth < self.cfg.max_depth;
            let roll: f64 = self.rng.gen();
            if can_fork && roll < self.cfg.fork_probability {
                let fork = self.fresh();
                append(self, fork, &mut last);
                let handed = self.hand_over(&mut pending);
                let (child_first, _, child_sources) = self.body(depth + 1, handed, true);
                self.b.future(fork, child_first);
                pending.push(Pending {
                    sources: child_sources.into(),
                });
                // The fork needs a plain continuation before anything else.
                let plain = self.fresh();
                append(self, plain, &mut last);
                no_touch = false;
                continue;
            }
            if !no_touch && !pending.is_empty() && self.rng.gen_bool(0.5) {
                let idx = self.rng.gen_range(0..pending.len());
                let node = self.touch_next(&mut pending, idx);
                append(self, node, &mut last);
                continue;
            }
            let node = self.fresh();
            append(self, node, &mut last);
            no_touch = false;
            if spawned && self.discipline.multi_touch() && self.rng.gen_bool(0.3) {
                sources.push(node);
            }
        }

        // Settle what is still owed.
        while !pending.is_empty() {
            let leave_for_final = self.discipline == Discipline::SuperFinal
                && pending[0].sources.len() == 1
                && self.rng.gen_bool(0.3);
            if leave_for_final {
                let p = pending.remove(0);
                self.to_final.extend(p.sources);
                continue;
            }
            let node = self.touch_next(&mut pending, 0);
            append(self, node, &mut last);
        }
        // A fresh end node: the thread's own touch point, or the main
        // thread's last node.
        let end = self.fresh();
        append(self, end, &mut last);
        if spawned {
            sources.push(end);
        }
        (first.expect("non-empty body"), end, sources)
    }

    /// Pending threads handed to a new child thread.
    fn hand_over(&mut self, pending: &mut Vec<Pending>) -> Vec<Pending> {
        let mut handed = Vec::new();
        if !self.discipline.may_pass() {
            return handed;
        }
        let mut i = 0;
        while i < pending.len() {
            if self.rng.gen_bool(0.25) {
                handed.push(pending.remove(i));
            } else {
                i += 1;
            }
        }
        handed
    }

    /// Creates a touch node for the next owed touch point of
    /// `pending[idx]`; drops the entry when it is exhausted.
    fn touch_next(&mut self, pending: &mut Vec<Pending>, idx: usize) -> NodeId {
        let source = pending[idx].sources.pop_front().expect("non-empty sources");
        let node = self.fresh();
        self.b.touch(source, node);
        if pending[idx].sources.is_empty() {
            pending.remove(idx);
        }
        node
    }
}

/// Random DAG obeying `discipline`, byte-identical for equal inputs.
pub fn gen_random_structured(
    discipline: Discipline,
    cfg: &RandomDagConfig,
) -> Result<GeneratedCase> {
    cfg.check()?;
    let mut g = Gen {
        b: DagBuilder::new().super_final(discipline == Discipline::SuperFinal),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
        discipline,
        to_final: Vec::new(),
    };
    let (root, end, _) = g.body(0, Vec::new(), false);
    let fin = if g.to_final.is_empty() {
        end
    } else {
        let fin = g.fresh();
        g.b.cont(end, fin);
        for s in std::mem::take(&mut g.to_final) {
            g.b.touch(s, fin);
        }
        fin
    };
    g.b.mark("root", root);
    g.b.mark("final", fin);
    let dag = g.b.build(root, fin)?;
    Ok(GeneratedCase {
        dag,
        script_hint: ScheduleScript::seeded(cfg.seed),
        processors: 1,
        policy: ForkPolicy::FutureFirst,
        params: serde_json::json!({
            "family": "random",
            "discipline": discipline.name(),
            "config": cfg,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{classify, validate};

    #[test]
    fn every_discipline_holds() {
        for d in Discipline::ALL {
            for seed in 0..200 {
                let case = gen_random_structured(d, &RandomDagConfig::seeded(seed)).unwrap();
                let report = validate(&case.dag);
                assert!(report.is_valid(), "{d} seed {seed}: {report}");
                let class = classify(&case.dag).unwrap();
                let ok = match d {
                    Discipline::Structured => class.is_structured,
                    Discipline::SingleTouch => class.is_single_touch,
                    Discipline::LocalTouch => class.is_local_touch,
                    Discipline::SuperFinal => class.is_single_touch_super_final,
                };
                assert!(ok, "{d} seed {seed}: {:?}", class.violations);
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = RandomDagConfig::seeded(42);
        let a = gen_random_structured(Discipline::Structured, &cfg).unwrap();
        let b = gen_random_structured(Discipline::Structured, &cfg).unwrap();
        assert_eq!(a.dag.to_json(), b.dag.to_json());
    }

    #[test]
    fn bad_probability_rejected() {
        let cfg = RandomDagConfig {
            fork_probability: 1.5,
            ..Default::default()
        };
        assert!(gen_random_structured(Discipline::SingleTouch, &cfg).is_err());
    }

    #[test]
    fn discipline_names_roundtrip() {
        for d in Discipline::ALL {
            assert_eq!(d.name().parse::<Discipline>().unwrap(), d);
        }
    }
}

//! DAG generators: adversarial lower-bound families with replay scripts,
//! fork-join trees, and seeded random structured DAGs.

mod ff;
mod pf;
mod random;

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, DagBuilder, NodeId};
use crate::sched::{ForkPolicy, ScheduleScript};
use crate::{Error, Result};

pub use ff::{gen_ff_amplified, gen_ff_block, gen_ff_full};
pub use pf::{gen_pf_cascade_block, gen_pf_full, gen_pf_parity_chain};
pub use random::{gen_random_structured, Discipline, RandomDagConfig};

/// A generated DAG together with the schedule that realizes its
/// adversarial run.
#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub dag: Dag,
    pub script_hint: ScheduleScript,
    /// Processor count the script is written for.
    pub processors: usize,
    pub policy: ForkPolicy,
    pub params: serde_json::Value,
}

impl GeneratedCase {
    /// Landmark lookup that panics on unknown names; generators guarantee
    /// their own landmark tables.
    pub fn node(&self, name: &str) -> NodeId {
        self.dag
            .landmark(name)
            .unwrap_or_else(|| panic!("landmark {name} missing"))
    }
}

/// Parameters echoed back by the fork-join generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ForkJoinParams {
    family: &'static str,
    depth: u32,
}

/// Balanced binary spawn/sync DAG with `2^depth - 1` forks.
pub fn gen_fork_join(depth: i64) -> Result<GeneratedCase> {
    if depth < 0 {
        return Err(Error::InvalidParam(format!(
            "depth must be >= 0, got {depth}"
        )));
    }
    if depth > 20 {
        return Err(Error::InvalidParam("depth above 20 is too large".into()));
    }
    let mut b = DagBuilder::new();
    let (first, last) = fork_join_segment(&mut b, depth as u32);
    let fin = b.node();
    b.cont(last, fin);
    b.mark("root", first);
    b.mark("final", fin);
    let dag = b.build(first, fin)?;
    Ok(GeneratedCase {
        dag,
        script_hint: ScheduleScript::seeded(0),
        processors: 1,
        policy: ForkPolicy::FutureFirst,
        params: serde_json::to_value(ForkJoinParams {
            family: "fork-join",
            depth: depth as u32,
        })
        .expect("params serialize"),
    })
}

/// `(first, last)` of a fork-join segment in the current thread.
fn fork_join_segment(b: &mut DagBuilder, depth: u32) -> (NodeId, NodeId) {
    if depth == 0 {
        let n = b.node();
        return (n, n);
    }
    let fork = b.node();
    let (lf, ll) = fork_join_segment(b, depth - 1);
    let (rf, rl) = fork_join_segment(b, depth - 1);
    let join = b.node();
    b.future(fork, lf);
    b.cont(fork, rf);
    b.cont(rl, join);
    b.touch(ll, join);
    (fork, join)
}

pub(crate) fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParam(msg.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{classify, count_touches, validate};

    #[test]
    fn fork_join_counts() {
        let c0 = gen_fork_join(0).unwrap();
        assert_eq!(c0.dag.len(), 2);
        assert_eq!(count_touches(&c0.dag).unwrap(), 0);

        let c1 = gen_fork_join(1).unwrap();
        assert_eq!(count_touches(&c1.dag).unwrap(), 1);
        assert!(classify(&c1.dag).unwrap().is_single_touch);

        let c3 = gen_fork_join(3).unwrap();
        assert!(validate(&c3.dag).is_valid());
        let forks = c3
            .dag
            .nodes()
            .iter()
            .filter(|n| c3.dag.is_fork(n.id))
            .count();
        assert_eq!(forks, 7);
        assert_eq!(count_touches(&c3.dag).unwrap(), 7);
        let class = classify(&c3.dag).unwrap();
        assert!(class.is_single_touch && class.is_local_touch);
    }

    #[test]
    fn fork_join_rejects_negative_depth() {
        assert!(gen_fork_join(-1).is_err());
    }
}

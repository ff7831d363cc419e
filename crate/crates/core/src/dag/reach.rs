use super::{Dag, NodeId};

/// Reflexive transitive closure over all edge kinds, stored as bitsets.
#[derive(Debug, Clone)]
pub struct Reachability {
    words: usize,
    bits: Vec<u64>,
}

impl Reachability {
    /// Requires an acyclic DAG.
    pub fn new(dag: &Dag) -> Self {
        let n = dag.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        let order = dag
            .topological_order()
            .expect("reachability needs an acyclic DAG");
        for &u in order.iter().rev() {
            let base = u.0 * words;
            bits[base + u.0 / 64] |= 1 << (u.0 % 64);
            for c in dag.children(u) {
                let cb = c.0 * words;
                for w in 0..words {
                    let v = bits[cb + w];
                    bits[base + w] |= v;
                }
            }
        }
        Reachability { words, bits }
    }

    /// True if `to` is `from` or a descendant of it.
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        self.bits[from.0 * self.words + to.0 / 64] >> (to.0 % 64) & 1 == 1
    }
}

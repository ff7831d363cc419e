//! Private fully associative LRU caches replayed over execution traces.

use serde::{Deserialize, Serialize};

use crate::dag::{BlockId, Dag};
use crate::sched::{Event, ExecutionTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Lines per processor; each line holds one block.
    pub lines: usize,
}

impl CacheConfig {
    pub fn new(lines: usize) -> Result<Self> {
        if lines == 0 {
            return Err(Error::InvalidParam("cache needs at least one line".into()));
        }
        Ok(CacheConfig { lines })
    }
}

/// Fully associative LRU cache. Lines are kept in recency order, most
/// recent last; `C` is small so a linear scan is fine.
#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: usize,
    lines: Vec<BlockId>,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        LruCache {
            capacity,
            lines: Vec::with_capacity(capacity),
        }
    }

    /// Accesses `block`; returns true on a miss.
    pub fn access(&mut self, block: BlockId) -> bool {
        if let Some(pos) = self.lines.iter().position(|&b| b == block) {
            let b = self.lines.remove(pos);
            self.lines.push(b);
            return false;
        }
        if self.lines.len() == self.capacity {
            self.lines.remove(0);
        }
        self.lines.push(block);
        true
    }

    pub fn contents(&self) -> &[BlockId] {
        &self.lines
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissReport {
    pub config: CacheConfig,
    pub dag_hash: String,
    pub per_processor_misses: Vec<u64>,
    pub total_misses: u64,
    /// Memory-accessing node executions per processor.
    pub per_processor_accesses: Vec<u64>,
    /// Node ids whose execution missed, in trace order.
    pub missed_nodes: Vec<usize>,
}

/// Replays `trace` through one cold cache per processor.
pub fn simulate_cache(trace: &ExecutionTrace, dag: &Dag, cfg: CacheConfig) -> Result<MissReport> {
    if cfg.lines == 0 {
        return Err(Error::InvalidParam("cache needs at least one line".into()));
    }
    trace.check_against(dag)?;
    let procs = trace.processors();
    let mut caches: Vec<LruCache> = (0..procs).map(|_| LruCache::new(cfg.lines)).collect();
    let mut misses = vec![0u64; procs];
    let mut accesses = vec![0u64; procs];
    let mut missed_nodes = Vec::new();
    for e in &trace.events {
        let Event::Executed { node } = e.event else {
            continue;
        };
        let Some(block) = dag.node(node).block else {
            continue;
        };
        accesses[e.processor] += 1;
        if caches[e.processor].access(block) {
            misses[e.processor] += 1;
            missed_nodes.push(node.0);
        }
    }
    Ok(MissReport {
        config: cfg,
        dag_hash: trace.header.dag_hash.clone(),
        total_misses: misses.iter().sum(),
        per_processor_misses: misses,
        per_processor_accesses: accesses,
        missed_nodes,
    })
}

/// Parallel total minus sequential total.
pub fn additional_misses(seq: &MissReport, par: &MissReport) -> Result<i64> {
    if seq.config != par.config {
        return Err(Error::ConfigMismatch(format!(
            "{} lines vs {} lines",
            seq.config.lines, par.config.lines
        )));
    }
    if seq.dag_hash != par.dag_hash {
        return Err(Error::ConfigMismatch(
            "reports come from different DAGs".into(),
        ));
    }
    Ok(par.total_misses as i64 - seq.total_misses as i64)
}

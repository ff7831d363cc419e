use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ForkPolicy;
use crate::dag::{Dag, NodeId};
use crate::{Error, Result};

/// Name of the victim-selection generator, recorded for replay.
pub const RNG_NAME: &str = "chacha8-seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Executed { node: NodeId },
    Pushed { node: NodeId },
    Popped { node: NodeId },
    Stole { node: NodeId, victim: usize },
    FailedSteal { victim: usize },
    Slept,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    #[serde(rename = "proc")]
    pub processor: usize,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub dag_hash: String,
    pub policy: ForkPolicy,
    pub processors: usize,
    pub script_hash: String,
    pub rng: String,
    pub seed: u64,
}

/// Complete record of one simulated run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub total_steps: u64,
    pub steal_count: usize,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
    total_steps: u64,
    steal_count: usize,
}

impl ExecutionTrace {
    pub fn processors(&self) -> usize {
        self.header.processors
    }

    /// Nodes in global execution order (step, then processor id).
    pub fn execution_order(&self) -> Vec<NodeId> {
        self.events
            .iter()
            .filter_map(|e| match e.event {
                Event::Executed { node } => Some(node),
                _ => None,
            })
            .collect()
    }

    /// Executed nodes of each processor, in order.
    pub fn per_processor(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.processors()];
        for e in &self.events {
            if let Event::Executed { node } = e.event {
                out[e.processor].push(node);
            }
        }
        out
    }

    /// `(processor, step)` that executed each node; `None` if never run.
    pub fn placement(&self, nodes: usize) -> Vec<Option<(usize, u64)>> {
        let mut out = vec![None; nodes];
        for e in &self.events {
            if let Event::Executed { node } = e.event {
                if node.0 < nodes {
                    out[node.0] = Some((e.processor, e.step));
                }
            }
        }
        out
    }

    /// Nodes taken by successful steals.
    pub fn stolen_nodes(&self) -> Vec<NodeId> {
        self.events
            .iter()
            .filter_map(|e| match e.event {
                Event::Stole { node, .. } => Some(node),
                _ => None,
            })
            .collect()
    }

    /// Checks that the trace executes every node of `dag` exactly once and
    /// only after its parents.
    pub fn check_against(&self, dag: &Dag) -> Result<()> {
        if self.header.dag_hash != dag.content_hash() {
            return Err(Error::TraceMismatch(
                "DAG hash differs from trace header".into(),
            ));
        }
        let mut when: Vec<Option<u64>> = vec![None; dag.len()];
        for e in &self.events {
            if let Event::Executed { node } = e.event {
                if node.0 >= dag.len() {
                    return Err(Error::TraceMismatch(format!("unknown node {node}")));
                }
                if when[node.0].is_some() {
                    return Err(Error::TraceMismatch(format!("node {node} executed twice")));
                }
                when[node.0] = Some(e.step);
            }
        }
        for node in dag.nodes() {
            let Some(t) = when[node.id.0] else {
                return Err(Error::TraceMismatch(format!(
                    "node {} never executed",
                    node.id
                )));
            };
            for p in dag.parents(node.id) {
                match when[p.0] {
                    Some(tp) if tp < t => {}
                    _ => {
                        return Err(Error::TraceMismatch(format!(
                            "node {} ran before its parent {p}",
                            node.id
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON lines: a header line, then one event per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        let head = HeaderLine {
            header: self.header.clone(),
            total_steps: self.total_steps,
            steal_count: self.steal_count,
        };
        serde_json::to_writer(&mut w, &head)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::TraceMismatch("empty trace file".into()))??;
        let head: HeaderLine = serde_json::from_str(&first)?;
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(ExecutionTrace {
            header: head.header,
            events,
            total_steps: head.total_steps,
            steal_count: head.steal_count,
        })
    }

    pub fn content_hash(&self) -> String {
        crate::hash::sha256_hex(self.to_jsonl().as_bytes())
    }
}

use serde::{Deserialize, Serialize};

use crate::dag::NodeId;
use crate::{Error, Result};

/// When a sleeping processor resumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeCondition {
    /// Skip this many turns, counting the turn the sleep starts on.
    Steps(u64),
    /// Resume once every listed node has been executed by anyone.
    Executed(Vec<NodeId>),
    Forever,
}

/// One scripted action. Directives other than `Wake` consume the
/// processor's turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Directive {
    /// Do `count` node executions using the default work rule.
    Execute {
        count: u32,
    },
    /// Work by the default rule until `node` has been executed.
    ExecuteUntil {
        node: NodeId,
    },
    Sleep {
        until: WakeCondition,
    },
    /// Zero-cost marker ending a script section.
    Wake,
    StealFrom {
        victim: usize,
    },
    PopOwn,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessorScript {
    pub id: usize,
    pub directives: Vec<Directive>,
}

/// Behavior once a processor's directives run out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefaultPolicy {
    pub random_victim_seed: u64,
}

/// Per-processor directive lists plus the fallback policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleScript {
    pub processors: Vec<ProcessorScript>,
    pub default: DefaultPolicy,
}

impl Default for ScheduleScript {
    fn default() -> Self {
        ScheduleScript::seeded(0)
    }
}

impl ScheduleScript {
    /// No directives; every processor uses seeded random stealing.
    pub fn seeded(seed: u64) -> Self {
        ScheduleScript {
            processors: Vec::new(),
            default: DefaultPolicy {
                random_victim_seed: seed,
            },
        }
    }

    /// Directives for processor `id`, empty if none were given.
    pub fn directives(&self, id: usize) -> &[Directive] {
        self.processors
            .iter()
            .find(|p| p.id == id)
            .map(|p| p.directives.as_slice())
            .unwrap_or(&[])
    }

    /// Appends a directive to processor `id`'s list.
    pub fn push(&mut self, id: usize, directive: Directive) {
        match self.processors.iter_mut().find(|p| p.id == id) {
            Some(p) => p.directives.push(directive),
            None => {
                self.processors.push(ProcessorScript {
                    id,
                    directives: vec![directive],
                });
                self.processors.sort_by_key(|p| p.id);
            }
        }
    }

    /// Highest processor id mentioned, plus one.
    pub fn min_processors(&self) -> usize {
        self.processors
            .iter()
            .flat_map(|p| {
                let victims = p.directives.iter().filter_map(|d| match d {
                    Directive::StealFrom { victim } => Some(*victim),
                    _ => None,
                });
                std::iter::once(p.id).chain(victims)
            })
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn check(&self, procs: usize, nodes: usize) -> Result<()> {
        for p in &self.processors {
            let err = |reason: String| Error::Script {
                processor: p.id,
                step: 0,
                reason,
            };
            if p.id >= procs {
                return Err(err(format!("processor id {} >= P={procs}", p.id)));
            }
            for d in &p.directives {
                match d {
                    Directive::StealFrom { victim } if *victim >= procs || *victim == p.id => {
                        return Err(err(format!("invalid steal victim {victim}")));
                    }
                    Directive::ExecuteUntil { node } if node.0 >= nodes => {
                        return Err(err(format!("unknown node {node}")));
                    }
                    Directive::Sleep {
                        until: WakeCondition::Executed(list),
                    } if list.iter().any(|n| n.0 >= nodes) => {
                        return Err(err("wake condition names an unknown node".into()));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn content_hash(&self) -> String {
        crate::hash::json_hash(self)
    }
}

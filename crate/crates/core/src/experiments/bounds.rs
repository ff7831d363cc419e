use serde::{Deserialize, Serialize};

use super::ExperimentResult;
use crate::cache::{additional_misses, simulate_cache, CacheConfig};
use crate::dag::{compute_span, count_touches};
use crate::generators::{gen_random_structured, Discipline, RandomDagConfig};
use crate::sched::{count_deviations, run_parallel, run_sequential, ForkPolicy, ScheduleScript};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundFamily {
    SingleTouch,
    LocalTouch,
    SingleTouchSuperFinal,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 3] = [
        BoundFamily::SingleTouch,
        BoundFamily::LocalTouch,
        BoundFamily::SingleTouchSuperFinal,
    ];

    fn discipline(self) -> Discipline {
        match self {
            BoundFamily::SingleTouch => Discipline::SingleTouch,
            BoundFamily::LocalTouch => Discipline::LocalTouch,
            BoundFamily::SingleTouchSuperFinal => Discipline::SuperFinal,
        }
    }

    /// Deviations allowed per steal: `2 * span`, or `2 * span^2` when a
    /// thread may be touched up to `span` times.
    fn per_steal(self, span: u64) -> u64 {
        match self {
            BoundFamily::LocalTouch => 2 * span * span,
            _ => 2 * span,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::SingleTouch => "single-touch",
            BoundFamily::LocalTouch => "local-touch",
            BoundFamily::SingleTouchSuperFinal => "single-touch-super-final",
        }
    }
}

impl std::str::FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSuiteConfig {
    pub family: BoundFamily,
    pub runs: u32,
    pub procs: Vec<usize>,
    pub cache_lines: Vec<usize>,
    pub seed: u64,
}

/// Victim-selection seed for one (DAG, processor count) pair.
fn steal_seed(base: u64, run: u64, procs: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add(run.wrapping_mul(97))
        .wrapping_add(procs as u64)
}

/// Random DAGs of one family under seeded random stealing: deviations stay
/// within the per-steal bound and additional misses within `C` per
/// deviation.
pub fn check_bound_suite(cfg: &BoundSuiteConfig) -> Result<ExperimentResult> {
    if cfg.runs == 0 {
        return Err(Error::InvalidParam("runs must be >= 1".into()));
    }
    if cfg.procs.is_empty() || cfg.procs.contains(&0) {
        return Err(Error::InvalidParam("processor counts must be >= 1".into()));
    }
    let caches = cfg
        .cache_lines
        .iter()
        .map(|&c| CacheConfig::new(c))
        .collect::<Result<Vec<_>>>()?;

    let name = format!("bound-suite-{}", cfg.family.name());
    let mut result = ExperimentResult::new(&name, serde_json::to_value(cfg)?);
    let (mut deviations, mut steals, mut touches) = (0u64, 0u64, 0u64);
    let (mut max_span, mut max_additional) = (0u64, i64::MIN);
    let (mut checks, mut violations) = (0i64, 0i64);

    for run in 0..cfg.runs as u64 {
        let dag_seed = cfg.seed.wrapping_add(run);
        let case =
            gen_random_structured(cfg.family.discipline(), &RandomDagConfig::seeded(dag_seed))?;
        let dag = &case.dag;
        let span = compute_span(dag)? as u64;
        max_span = max_span.max(span);
        touches += count_touches(dag)? as u64;
        let seq = run_sequential(dag, ForkPolicy::FutureFirst)?;
        let seq_reports = caches
            .iter()
            .map(|&c| simulate_cache(&seq, dag, c))
            .collect::<Result<Vec<_>>>()?;

        for &p in &cfg.procs {
            let script = ScheduleScript::seeded(steal_seed(cfg.seed, run, p));
            let par = run_parallel(dag, ForkPolicy::FutureFirst, p, &script)?;
            let dev = count_deviations(dag, &seq, &par)?;
            let s = par.steal_count as u64;
            deviations += dev.count as u64;
            steals += s;
            checks += 1;
            let bound = s * cfg.family.per_steal(span);
            if dev.count as u64 > bound {
                violations += 1;
                result.note(format!(
                    "dag seed {dag_seed}, P={p}: {} deviations > {bound}",
                    dev.count
                ));
            }
            for (cache, seq_report) in caches.iter().zip(&seq_reports) {
                let par_report = simulate_cache(&par, dag, *cache)?;
                let extra = additional_misses(seq_report, &par_report)?;
                max_additional = max_additional.max(extra);
                checks += 1;
                if extra > (cache.lines * dev.count) as i64 {
                    violations += 1;
                    result.note(format!(
                        "dag seed {dag_seed}, P={p}, C={}: {extra} additional misses > C * {}",
                        cache.lines, dev.count
                    ));
                }
            }
        }
    }

    let m = &mut result.measured;
    m.deviations = Some(deviations);
    m.steals = Some(steals);
    m.span = Some(max_span);
    m.touches = Some(touches);
    if !caches.is_empty() {
        m.additional_misses = Some(max_additional);
    }
    m.extra.insert("runs".into(), cfg.runs as i64);
    m.extra.insert("checks".into(), checks);
    m.extra.insert("violations".into(), violations);
    result.note("deviations and steals are totals; span and additional_misses are maxima");
    Ok(result.decide(violations == 0))
}

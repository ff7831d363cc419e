use serde_json::json;

use super::ExperimentResult;
use crate::cache::{additional_misses, simulate_cache, CacheConfig};
use crate::dag::{compute_span, count_touches};
use crate::generators::{gen_ff_full, gen_pf_full, GeneratedCase};
use crate::sched::{count_deviations, run_parallel, run_sequential, ExecutionTrace};
use crate::Result;

/// Scale of the future-first additional-miss lower bound
/// `C * (k - 1) * n * C1`.
pub const C1: u64 = 1;

/// Slack in the parent-first sequential bound `C + 2t + C0`.
pub const C0: u64 = 4;

/// Parent-first deviations and misses must reach `t * n / 4` (times `C`
/// for misses).
pub const THEOREM3_DEVIATION_FACTOR: u64 = 4;

struct Runs {
    seq: ExecutionTrace,
    par: ExecutionTrace,
}

fn replay(case: &GeneratedCase) -> Result<Runs> {
    Ok(Runs {
        seq: run_sequential(&case.dag, case.policy)?,
        par: run_parallel(&case.dag, case.policy, case.processors, &case.script_hint)?,
    })
}

/// Sequential miss ceiling for the future-first construction: each of the
/// `n * k` blocks costs at most `C + 2k` misses from a cold cache.
fn future_first_seq_cap(n: u64, k: u64, c: u64) -> u64 {
    n * k * (c + 2 * k)
}

/// Future-first lower bound: at least `n * k^2` deviations, within the
/// per-steal upper bound; in cache mode also many additional misses while
/// the sequential run stays cheap.
pub fn run_theorem2_experiment(n: i64, k: i64, c: i64, cache: bool) -> Result<ExperimentResult> {
    let case = gen_ff_full(n, k, cache, c)?;
    let mut result =
        ExperimentResult::new("theorem2", json!({"n": n, "k": k, "C": c, "cache": cache}));
    let runs = replay(&case)?;
    let dev = count_deviations(&case.dag, &runs.seq, &runs.par)?;
    let span = compute_span(&case.dag)? as u64;
    let steals = runs.par.steal_count as u64;
    let (n, k) = (n as u64, k as u64);

    let m = &mut result.measured;
    m.deviations = Some(dev.count as u64);
    m.steals = Some(steals);
    m.span = Some(span);
    m.touches = Some(count_touches(&case.dag)? as u64);
    m.extra
        .insert("touch_deviations".into(), dev.touch_deviations as i64);

    let lower = dev.count as u64 >= n * k * k;
    let upper = dev.count as u64 <= 2 * steals * span;
    let mut pass = lower && upper;
    if !lower {
        result.note(format!("{} deviations < n*k^2 = {}", dev.count, n * k * k));
    }
    if !upper {
        result.note(format!(
            "{} deviations > 2*steals*span = {}",
            dev.count,
            2 * steals * span
        ));
    }

    if cache {
        let cfg = CacheConfig::new(c as usize)?;
        let seq = simulate_cache(&runs.seq, &case.dag, cfg)?;
        let par = simulate_cache(&runs.par, &case.dag, cfg)?;
        let extra = additional_misses(&seq, &par)?;
        let m = &mut result.measured;
        m.seq_misses = Some(seq.total_misses);
        m.par_misses = Some(par.total_misses);
        m.additional_misses = Some(extra);
        let want = c as u64 * (k - 1) * n * C1;
        let cap = future_first_seq_cap(n, k, c as u64);
        if extra < want as i64 {
            pass = false;
            result.note(format!("{extra} additional misses < C*(k-1)*n*c1 = {want}"));
        }
        if seq.total_misses > cap {
            pass = false;
            result.note(format!("{} sequential misses > {cap}", seq.total_misses));
        }
    }
    Ok(result.decide(pass))
}

/// Parent-first lower bound: one steal yields `Θ(t n)` deviations and
/// `Θ(C t n)` misses, against `C + 2t + c0` sequential misses.
pub fn run_theorem3_experiment(t: i64, n: i64, c: i64) -> Result<ExperimentResult> {
    let case = gen_pf_full(t, n, c)?;
    let mut result = ExperimentResult::new("theorem3", json!({"t": t, "n": n, "C": c}));
    let runs = replay(&case)?;
    let dev = count_deviations(&case.dag, &runs.seq, &runs.par)?;
    let cfg = CacheConfig::new(c as usize)?;
    let seq = simulate_cache(&runs.seq, &case.dag, cfg)?;
    let par = simulate_cache(&runs.par, &case.dag, cfg)?;
    let (t, n, c) = (t as u64, n as u64, c as u64);

    let m = &mut result.measured;
    m.deviations = Some(dev.count as u64);
    m.steals = Some(runs.par.steal_count as u64);
    m.span = Some(compute_span(&case.dag)? as u64);
    m.touches = Some(count_touches(&case.dag)? as u64);
    m.seq_misses = Some(seq.total_misses);
    m.par_misses = Some(par.total_misses);
    m.additional_misses = Some(additional_misses(&seq, &par)?);

    let dev_floor = t * n / THEOREM3_DEVIATION_FACTOR;
    let miss_floor = c * t * n / THEOREM3_DEVIATION_FACTOR;
    let seq_cap = c + 2 * t + C0;
    let mut pass = true;
    if (dev.count as u64) < dev_floor {
        pass = false;
        result.note(format!("{} deviations < t*n/4 = {dev_floor}", dev.count));
    }
    if par.total_misses < miss_floor {
        pass = false;
        result.note(format!(
            "{} parallel misses < C*t*n/4 = {miss_floor}",
            par.total_misses
        ));
    }
    if seq.total_misses > seq_cap {
        pass = false;
        result.note(format!(
            "{} sequential misses > C+2t+c0 = {seq_cap}",
            seq.total_misses
        ));
    }
    if runs.par.steal_count != 1 {
        pass = false;
        result.note(format!(
            "{} steals, expected exactly one",
            runs.par.steal_count
        ));
    }
    Ok(result.decide(pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn future_first_small_and_full() {
        let r = run_theorem2_experiment(1, 1, 2, false).unwrap();
        assert!(r.pass, "{:?}", r.tolerance_notes);
        let r = run_theorem2_experiment(4, 4, 4, true).unwrap();
        assert!(r.pass, "{:?} {:?}", r.measured, r.tolerance_notes);
        assert!(r.measured.deviations.unwrap() >= 64);
    }

    #[test]
    fn future_first_linear_in_n() {
        let d2 = run_theorem2_experiment(2, 4, 2, false)
            .unwrap()
            .measured
            .deviations
            .unwrap();
        let d4 = run_theorem2_experiment(4, 4, 2, false)
            .unwrap()
            .measured
            .deviations
            .unwrap();
        let ratio = d4 as f64 / d2 as f64;
        assert!((1.8..=2.2).contains(&ratio), "{d2} {d4}");
    }

    #[test]
    fn parent_first_points() {
        let r = run_theorem3_experiment(1, 2, 2).unwrap();
        assert!(r.measured.deviations.unwrap() >= 1);
        let r = run_theorem3_experiment(8, 8, 4).unwrap();
        assert!(r.pass, "{:?} {:?}", r.measured, r.tolerance_notes);
        let p2 = run_theorem3_experiment(8, 8, 2)
            .unwrap()
            .measured
            .par_misses
            .unwrap();
        let p4 = run_theorem3_experiment(8, 8, 4)
            .unwrap()
            .measured
            .par_misses
            .unwrap();
        let ratio = p4 as f64 / p2 as f64;
        assert!((1.6..=2.4).contains(&ratio), "{p2} {p4}");
    }
}

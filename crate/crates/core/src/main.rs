use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use wsdag::cache::{simulate_cache, CacheConfig};
use wsdag::dag::{classify, validate, Dag};
use wsdag::experiments::{
    check_bound_suite, check_lemma1_with, check_lemma2, check_parity_law, render,
    run_theorem2_experiment, run_theorem3_experiment, write_atomic, BoundFamily, BoundSuiteConfig,
    ExperimentResult, Format, Lemma1Variant, Status,
};
use wsdag::generators::{
    gen_ff_amplified, gen_ff_block, gen_ff_full, gen_fork_join, gen_pf_cascade_block, gen_pf_full,
    gen_pf_parity_chain, gen_random_structured, Discipline, GeneratedCase, RandomDagConfig,
};
use wsdag::sched::{count_deviations, run_parallel, ExecutionTrace, ForkPolicy, ScheduleScript};

/// Work-stealing simulator for future-parallel computation DAGs.
#[derive(Parser)]
#[command(name = "wsdag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a DAG, optionally with its adversarial schedule.
    Gen {
        #[command(subcommand)]
        family: Family,
        /// DAG output file.
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
        /// Schedule script output file.
        #[arg(long, global = true)]
        script: Option<PathBuf>,
    },
    /// Check structural rules; prints violated rule names.
    Validate { dag: PathBuf },
    /// Print the classification report as JSON.
    Classify { dag: PathBuf },
    /// Simulate a run and write its trace as JSON lines.
    Run(RunArgs),
    /// Compare a sequential and a parallel trace.
    Deviations {
        #[arg(long)]
        dag: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        par: PathBuf,
    },
    /// Run a named experiment.
    Experiment {
        #[command(subcommand)]
        name: Experiment,
        #[arg(long, default_value = "json", global = true)]
        format: Format,
        /// Result file; printed to standard output when absent.
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CacheArgs {
    /// Assign memory blocks to nodes.
    #[arg(long)]
    cache: bool,
    /// Cache size in lines.
    #[arg(long = "C", visible_alias = "c", default_value_t = 4)]
    c: i64,
}

#[derive(Subcommand)]
enum Family {
    /// Balanced binary spawn/sync tree.
    ForkJoin {
        #[arg(long)]
        depth: i64,
    },
    /// One future-first block on two processors.
    FfBlock {
        #[arg(long)]
        k: i64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// k future-first blocks on a spine, three processors.
    FfAmplified {
        #[arg(long)]
        k: i64,
    },
    /// Fork tree over n amplified structures, 3n processors.
    FfFull {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        k: i64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// One parent-first cascade block.
    PfCascadeBlock {
        #[arg(long)]
        n: i64,
        #[arg(long = "C", visible_alias = "c")]
        c: i64,
    },
    /// Parity chain of length k ending in a cascade block.
    PfParityChain {
        #[arg(long)]
        k: i64,
        #[arg(long)]
        n: i64,
        #[arg(long = "C", visible_alias = "c")]
        c: i64,
    },
    /// t chained cascade segments flipped by one steal.
    PfFull {
        #[arg(long)]
        t: i64,
        #[arg(long)]
        n: i64,
        #[arg(long = "C", visible_alias = "c")]
        c: i64,
    },
    /// Seeded random DAG in one touch discipline.
    Random {
        #[arg(long)]
        discipline: Discipline,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_depth: u32,
        #[arg(long, default_value_t = 0.35)]
        fork_probability: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dag: PathBuf,
    #[arg(long)]
    policy: ForkPolicy,
    #[arg(long)]
    procs: usize,
    #[arg(long, conflicts_with = "seed")]
    script: Option<PathBuf>,
    /// Victim-selection seed when no script is given.
    #[arg(long)]
    seed: Option<u64>,
    /// Also replay the trace through caches with this many lines.
    #[arg(long)]
    cache: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Experiment {
    /// Sequential-order property on a single-touch DAG.
    Lemma1 {
        #[arg(long)]
        dag: PathBuf,
    },
    /// Sequential-order property on a local-touch DAG.
    Lemma3 {
        #[arg(long)]
        dag: PathBuf,
    },
    /// Steal-or-deviated-touch property on one parallel run.
    Lemma2 {
        #[arg(long)]
        dag: PathBuf,
        #[arg(long)]
        procs: usize,
        #[arg(long, conflicts_with = "seed")]
        script: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Deviation and miss bounds over random DAGs of one family.
    BoundSuite {
        #[arg(long)]
        family: BoundFamily,
        #[arg(long, default_value_t = 100)]
        runs: u32,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        procs: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,8")]
        cache_lines: Vec<usize>,
        #[arg(long)]
        seed: u64,
    },
    /// Future-first lower-bound construction.
    Theorem2 {
        #[arg(long)]
        n: i64,
        #[arg(long)]
        k: i64,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Parent-first lower-bound construction.
    Theorem3 {
        #[arg(long)]
        t: i64,
        #[arg(long)]
        n: i64,
        #[arg(long = "C", visible_alias = "c")]
        c: i64,
    },
    /// Order law of the parent-first parity chain.
    Parity {
        #[arg(long)]
        k: i64,
        #[arg(long, default_value_t = 2)]
        n: i64,
        #[arg(long = "C", visible_alias = "c", default_value_t = 2)]
        c: i64,
    },
}

fn load_dag(path: &Path) -> anyhow::Result<Dag> {
    Dag::load(path).with_context(|| format!("reading DAG {}", path.display()))
}

fn load_script(path: &Path) -> anyhow::Result<ScheduleScript> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading script {}", path.display()))?;
    Ok(ScheduleScript::from_json(&text)?)
}

fn load_trace(path: &Path) -> anyhow::Result<ExecutionTrace> {
    let file = File::open(path).with_context(|| format!("reading trace {}", path.display()))?;
    Ok(ExecutionTrace::read_jsonl(BufReader::new(file))?)
}

fn script_or_seed(script: Option<&Path>, seed: Option<u64>) -> anyhow::Result<ScheduleScript> {
    match (script, seed) {
        (Some(p), _) => load_script(p),
        (None, Some(s)) => Ok(ScheduleScript::seeded(s)),
        (None, None) => bail!("either --script or --seed is required"),
    }
}

fn say(line: String) -> anyhow::Result<()> {
    writeln!(std::io::stdout().lock(), "{line}")?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display()))?
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn generate(family: Family) -> wsdag::Result<GeneratedCase> {
    match family {
        Family::ForkJoin { depth } => gen_fork_join(depth),
        Family::FfBlock { k, cache } => gen_ff_block(k, cache.cache, cache.c),
        Family::FfAmplified { k } => gen_ff_amplified(k),
        Family::FfFull { n, k, cache } => gen_ff_full(n, k, cache.cache, cache.c),
        Family::PfCascadeBlock { n, c } => gen_pf_cascade_block(n, c),
        Family::PfParityChain { k, n, c } => gen_pf_parity_chain(k, n, c),
        Family::PfFull { t, n, c } => gen_pf_full(t, n, c),
        Family::Random {
            discipline,
            seed,
            max_depth,
            fork_probability,
        } => gen_random_structured(
            discipline,
            &RandomDagConfig {
                seed,
                max_depth,
                fork_probability,
                ..RandomDagConfig::default()
            },
        ),
    }
}

fn experiment(name: Experiment) -> anyhow::Result<ExperimentResult> {
    Ok(match name {
        Experiment::Lemma1 { dag } => {
            check_lemma1_with(&load_dag(&dag)?, Lemma1Variant::SingleTouch)?
        }
        Experiment::Lemma3 { dag } => {
            check_lemma1_with(&load_dag(&dag)?, Lemma1Variant::LocalTouch)?
        }
        Experiment::Lemma2 {
            dag,
            procs,
            script,
            seed,
        } => {
            let script = script_or_seed(script.as_deref(), seed)?;
            check_lemma2(&load_dag(&dag)?, procs, &script)?
        }
        Experiment::BoundSuite {
            family,
            runs,
            procs,
            cache_lines,
            seed,
        } => check_bound_suite(&BoundSuiteConfig {
            family,
            runs,
            procs,
            cache_lines,
            seed,
        })?,
        Experiment::Theorem2 { n, k, cache } => {
            run_theorem2_experiment(n, k, cache.c, cache.cache)?
        }
        Experiment::Theorem3 { t, n, c } => run_theorem3_experiment(t, n, c)?,
        Experiment::Parity { k, n, c } => check_parity_law(k, n, c)?,
    })
}

/// Returns the process exit status for a command that ran to completion.
fn execute(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Gen {
            family,
            output,
            script,
        } => {
            let case = generate(family)?;
            emit(output.as_deref(), &case.dag.to_json())?;
            if let Some(p) = script {
                write_atomic(&p, case.script_hint.to_json().as_bytes())?;
            }
            eprintln!(
                "{} nodes, {} processors, {}",
                case.dag.len(),
                case.processors,
                serde_json::to_string(&case.policy)?.trim_matches('"')
            );
            Ok(0)
        }
        Command::Validate { dag } => {
            let report = validate(&load_dag(&dag)?);
            if report.is_valid() {
                say("valid".into())?;
                Ok(0)
            } else {
                for rule in report.rules() {
                    say(rule.to_string())?;
                }
                eprintln!("{report}");
                Ok(2)
            }
        }
        Command::Classify { dag } => {
            let report = classify(&load_dag(&dag)?)?;
            say(serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Run(args) => {
            let dag = load_dag(&args.dag)?;
            let script = match (&args.script, args.seed) {
                (None, None) => ScheduleScript::default(),
                (s, seed) => script_or_seed(s.as_deref(), seed)?,
            };
            let trace = run_parallel(&dag, args.policy, args.procs, &script)?;
            write_atomic(&args.output, trace.to_jsonl().as_bytes())?;
            if let Some(lines) = args.cache {
                let report = simulate_cache(&trace, &dag, CacheConfig::new(lines)?)?;
                say(serde_json::to_string_pretty(&report)?)?;
            }
            eprintln!("{} steps, {} steals", trace.total_steps, trace.steal_count);
            Ok(0)
        }
        Command::Deviations { dag, seq, par } => {
            let dag = load_dag(&dag)?;
            let report = count_deviations(&dag, &load_trace(&seq)?, &load_trace(&par)?)?;
            say(serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Experiment {
            name,
            format,
            output,
        } => {
            let result = experiment(name)?;
            emit(
                output.as_deref(),
                &render(std::slice::from_ref(&result), format)?,
            )?;
            Ok(match result.status {
                Status::Pass | Status::Skipped => 0,
                Status::Fail => 1,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        // A closed pipe on stdout (e.g. `| head`) is not an error.
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

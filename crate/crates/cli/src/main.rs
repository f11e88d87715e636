//! Command-line front end: validate configurations, sample fields, walks and
//! loop soups, run the verification harness and the splitting experiment.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use holonomy_fields::calculus::green_section;
use holonomy_fields::coloured::{loop_table, sample_loop_soups, SignedEnsemble, StateSpace};
use holonomy_fields::fields::sample_gff;
use holonomy_fields::fixtures::Fixture;
use holonomy_fields::harness::{check_names, experiment_splittings, run_checks, RunOptions};
use holonomy_fields::io::{self, RunConfig};
use holonomy_fields::mc;
use holonomy_fields::paths::sample_walk;
use holonomy_fields::stats::ScalarAcc;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "holonomy-fields", version, about = "Vector-bundle calculus on graphs with a well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample count; overrides the configuration.
    #[arg(long, alias = "n")]
    samples: Option<usize>,
    /// Exact tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the structural validators and print one line per invariant.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Draw fields, walks or loop soups and write them to the output directory.
    Sample {
        what: Sample,
        /// Start vertex of the walks; every proper vertex when omitted.
        #[arg(long)]
        from: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run harness checks by name, or `all`, and write `report.json`.
    Verify {
        #[arg(default_value = "all")]
        checks: Vec<String>,
        /// Record wall-clock runtimes in the report.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the complete and trivial splittings and write `experiment.json`.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sample {
    Field,
    Walks,
    Loops,
}

/// Usage errors exit with status 2, like clap's own.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const DEFAULT_SAMPLES: usize = 100_000;
const DEFAULT_DRAWS: usize = 1000;
/// Loop mass left out of sampled soups.
const LOOP_TAIL: f64 = 1e-4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() { 2 } else { 1 })
        }
    }
}

/// Caps the rayon pool at `HF_THREADS` workers.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| anyhow!("HF_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        bail!("HF_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { common } => validate(&common.config),
        Command::Sample { what, from, common } => {
            let run = Run::new(&common, DEFAULT_DRAWS)?;
            match what {
                Sample::Field => sample_field(&run),
                Sample::Walks => sample_walks(&run, from.as_deref()),
                Sample::Loops => sample_loops(&run),
            }
        }
        Command::Verify { checks, timings, common } => {
            let run = Run::new(&common, DEFAULT_SAMPLES)?;
            verify(&run, &checks, timings)
        }
        Command::Experiment { common } => experiment(&Run::new(&common, DEFAULT_SAMPLES)?),
    }
}

/// A validated configuration with the effective run settings.
struct Run {
    fx: Fixture,
    opts: RunOptions,
    out: PathBuf,
}

impl Run {
    fn new(c: &Common, default_samples: usize) -> Result<Run> {
        let (config, fx) = io::load_fixture(&c.config).with_context(|| format!("loading {}", c.config.display()))?;
        let seed = c
            .seed
            .or(config.seed)
            .ok_or_else(|| Usage("a seed is required: pass --seed or set it in the configuration".into()))?;
        let samples = c.samples.or(config.samples).unwrap_or(default_samples);
        if samples == 0 {
            return Err(Usage("--samples must be positive".into()).into());
        }
        let opts = RunOptions { seed, samples, tol: c.tol.or(config.tol), ..Default::default() };
        Ok(Run { fx, opts, out: out_dir(c, &config) })
    }

    fn write(&self, file: &str, text: &str) -> Result<PathBuf> {
        let path = self.out.join(file);
        io::write_text(&path, text)?;
        Ok(path)
    }
}

/// `--out`, else the configuration's directory relative to its own file,
/// else `out`.
fn out_dir(c: &Common, config: &RunConfig) -> PathBuf {
    if let Some(o) = &c.out {
        return o.clone();
    }
    match &config.out {
        Some(o) if o.is_relative() => c.config.parent().unwrap_or(Path::new(".")).join(o),
        Some(o) => o.clone(),
        None => PathBuf::from("out"),
    }
}

fn validate(config: &Path) -> Result<ExitCode> {
    let loaded = io::load(config).with_context(|| format!("reading {}", config.display()))?;
    for v in &loaded.log {
        match &v.result {
            Ok(()) => println!("ok    {}", v.invariant),
            Err(e) => println!("FAIL  {}  {e}", v.invariant),
        }
    }
    match loaded.first_failure() {
        Some(e) => {
            eprintln!("{e}");
            Ok(ExitCode::from(1))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn sample_field(run: &Run) -> Result<ExitCode> {
    let fx = &run.fx;
    let (g, r) = (&fx.graph, fx.bundle.rank);
    let draws = sample_gff(g, &fx.bundle, &fx.connection, &fx.potential, run.opts.samples, run.opts.seed)?;
    let path = run.write("field.csv", &io::field_csv(g, r, &draws))?;
    let mut norm = ScalarAcc::default();
    for phi in &draws {
        norm.push(phi.norm_squared());
    }
    let exact = green_section(g, &fx.connection, &fx.potential)?.trace().re;
    println!("wrote {} samples to {}", draws.len(), path.display());
    println!("mean |Φ|² = {:.6} ± {:.6}, Tr G = {exact:.6}", norm.mean(), norm.stderr());
    Ok(ExitCode::SUCCESS)
}

fn sample_walks(run: &Run, from: Option<&str>) -> Result<ExitCode> {
    let g = &run.fx.graph;
    let starts: Vec<usize> = match from {
        Some(id) => {
            let v = g.vertex_by_id(id).ok_or_else(|| Usage(format!("unknown vertex {id:?}")))?;
            if g.is_well(v) {
                return Err(Usage(format!("vertex {id:?} lies in the well")).into());
            }
            vec![v]
        }
        None => (0..g.n_proper()).map(|x| g.proper_vertex(x)).collect(),
    };
    let mut walks = Vec::new();
    for &v in &starts {
        let tag = format!("cli/walks/{}", g.vertex_id(v));
        let batch = mc::run_batches(run.opts.seed, &tag, run.opts.samples, mc::Collect::default, |rng, count, acc| {
            for _ in 0..count {
                acc.0.push(sample_walk(g, v, rng)?);
            }
            Ok(())
        })?;
        let (mut jumps, mut life) = (ScalarAcc::default(), ScalarAcc::default());
        for w in &batch.0 {
            jumps.push(w.n_jumps() as f64);
            life.push(w.hitting_time(g));
        }
        println!(
            "{}: {} walks, mean jumps {:.4} ± {:.4}, mean absorption time {:.4} ± {:.4}",
            g.vertex_id(v),
            batch.0.len(),
            jumps.mean(),
            jumps.stderr(),
            life.mean(),
            life.stderr()
        );
        walks.extend(batch.0);
    }
    let path = run.write("walks.jsonl", &io::walks_jsonl(g, &walks)?)?;
    println!("wrote {} walks to {}", walks.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn sample_loops(run: &Run) -> Result<ExitCode> {
    let fx = &run.fx;
    let g = &fx.graph;
    let alpha = 0.5 * fx.bundle.beta();
    let table = loop_table(g, &fx.connection, &fx.splitting, LOOP_TAIL)?;
    let st = StateSpace::new(&fx.splitting);
    let soups: Vec<SignedEnsemble> =
        mc::run_batches(run.opts.seed, "cli/loops", run.opts.samples, mc::Collect::default, |rng, count, acc| {
            acc.0.extend(sample_loop_soups(g, &table, alpha, count, rng)?);
            Ok(())
        })?
        .0;
    let mut count = ScalarAcc::default();
    for s in &soups {
        count.push((s.positive.len() + s.negative.len()) as f64);
    }
    let loops = run.write("loops.jsonl", &io::loops_jsonl(g, &soups)?)?;
    let pos: Vec<_> = soups.iter().map(|s| s.positive_occupation(g, &st)).collect();
    run.write("occupation.csv", &io::occupation_csv(g, &st, &pos))?;
    if table.negative_mass() > 0.0 {
        let neg: Vec<_> = soups.iter().map(|s| s.negative_occupation(g, &st)).collect();
        run.write("occupation-negative.csv", &io::occupation_csv(g, &st, &neg))?;
    }
    println!("wrote {} soups to {}", soups.len(), loops.display());
    println!(
        "mean non-constant loop count {:.4} ± {:.4}, expected {:.4} (intensity {alpha}, {} jumps max, tail ≤ {:.1e})",
        count.mean(),
        count.stderr(),
        alpha * table.total_variation(),
        table.n_max,
        table.tail_bound
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(run: &Run, checks: &[String], timings: bool) -> Result<ExitCode> {
    let opts = RunOptions { timings, ..run.opts.clone() };
    let names: Vec<&str> = checks.iter().map(String::as_str).collect();
    let reports = run_checks(&names, &run.fx, &opts)
        .map_err(|n| Usage(format!("unknown check {n:?}; known: all, {}", check_names().join(", "))))?;
    let path = run.write("report.json", &io::report_json(&reports)?)?;
    for rep in &reports {
        let status = if rep.pass { "PASS" } else { "FAIL" };
        let time = rep.runtime_s.map(|t| format!(" {t:.1}s")).unwrap_or_default();
        println!("{status}  {:<18} max rel {:.1e}  max |z| {:.2}{time}", rep.name, rep.max_rel_err, rep.max_abs_z);
        if let Some(e) = &rep.error {
            println!("      error: {e}");
        }
        for c in rep.failures() {
            println!("      failed: {}", c.label);
        }
    }
    println!("wrote {}", path.display());
    Ok(if reports.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn experiment(run: &Run) -> Result<ExitCode> {
    let rep = experiment_splittings(&run.fx, &run.opts)?;
    let path = run.write("experiment.json", &io::report_json(std::slice::from_ref(&rep))?)?;
    for row in &rep.rows {
        let u: Vec<String> = row.potential.iter().map(|u| format!("{u:.3}")).collect();
        println!(
            "u = [{}]  complete {:+.6e}  trivial {:+.6e}  |diff| {:.2e}",
            u.join(", "),
            row.lhs_log,
            row.rhs_log,
            row.abs_diff
        );
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

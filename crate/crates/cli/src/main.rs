//! `dfopt`: generate instances, solve them, and run experiment grids.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 a budget stopped an
//! exact method (the partial result is still written), 4 solver failure.

mod experiment;
mod methods;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use dfopt_core::benders::BnbOptions;
use dfopt_core::instancegen::{generate, max3sat_to_instance, rng_from_seed, Cnf3Formula, GeneratorConfig};
use dfopt_core::io::{instance_from_json, instance_to_json};
use dfopt_core::model::Instance;
use dfopt_core::{Error, Exact, Scalar};
use serde::Deserialize;

use crate::experiment::{run_experiment, ExperimentSpec};
use crate::methods::{run, Method, SolveOptions};

#[derive(Parser)]
#[command(name = "dfopt", version, about = "Assortment optimization under decision forest choice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance JSON from a generator config or a DIMACS formula.
    Generate {
        /// Generator config: one object, a list of objects, or a `max3sat` block.
        #[arg(long, conflicts_with = "cnf")]
        config: Option<PathBuf>,
        /// 3-CNF formula in DIMACS format, encoded one clause per tree.
        #[arg(long)]
        cnf: Option<PathBuf>,
        /// Overrides the config seed; for a list, config `i` gets `seed + i`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file, or directory for a list. Stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance and print a JSON report.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// brute, monolithic:KIND, benders:KIND (KIND = leaf|split|product), ls, ls10, roa, dnc.
        #[arg(long)]
        method: String,
        #[arg(long)]
        cardinality: Option<usize>,
        #[arg(long)]
        budget_sec: Option<f64>,
        #[arg(long)]
        budget_nodes: Option<u64>,
        /// Seed for ls10 and dnc starts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rational arithmetic throughout.
        #[arg(long)]
        exact: bool,
        /// Include wall-clock fields in the report.
        #[arg(long)]
        timings: bool,
        /// Branch-and-bound progress on stderr.
        #[arg(long)]
        verbose: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid and write one CSV per table.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget_sec: Option<f64>,
        #[arg(long)]
        budget_nodes: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Include wall-clock columns.
        #[arg(long)]
        timings: bool,
    },
}

/// Error carrying the process exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
struct Failure {
    code: u8,
    message: String,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return f.code;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Solver(_) | Error::Contract(_)) => 4,
        _ => 2,
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Max3SatConfig {
    num_vars: usize,
    num_clauses: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GenerateDoc {
    Max3Sat { max3sat: Max3SatConfig },
    Single(GeneratorConfig),
    Grid(Vec<GeneratorConfig>),
}

fn cmd_generate(
    config: Option<PathBuf>,
    cnf: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let with_newline = |s: String| s + "\n";
    if let Some(path) = cnf {
        let formula = Cnf3Formula::parse_dimacs(&read(&path)?)?;
        let inst: Instance<Exact> = max3sat_to_instance(&formula)?;
        return emit(out.as_deref(), &with_newline(instance_to_json(&inst)));
    }
    let Some(path) = config else { bail!(Error::Config("generate needs --config or --cnf".into())) };
    let doc: GenerateDoc = serde_json::from_str(&read(&path)?)
        .map_err(|e| Error::Config(format!("{}: not a generator config ({e})", path.display())))?;
    match doc {
        GenerateDoc::Max3Sat { max3sat: c } => {
            let mut rng = rng_from_seed(seed.unwrap_or(c.seed));
            let formula = Cnf3Formula::random(c.num_vars, c.num_clauses, &mut rng)?;
            let inst: Instance<Exact> = max3sat_to_instance(&formula)?;
            emit(out.as_deref(), &with_newline(instance_to_json(&inst)))
        }
        GenerateDoc::Single(mut c) => {
            if let Some(s) = seed {
                c.seed = s;
            }
            emit(out.as_deref(), &with_newline(instance_to_json(&generate(&c)?)))
        }
        GenerateDoc::Grid(configs) => {
            let Some(dir) = out else { bail!(Error::Config("a config list needs --out DIR".into())) };
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let master = seed.unwrap_or(0);
            for (i, mut c) in configs.into_iter().enumerate() {
                c.seed = master.wrapping_add(i as u64);
                let inst = generate(&c)?;
                let file = dir.join(format!("instance_{i:03}.json"));
                emit(Some(&file), &with_newline(instance_to_json(&inst)))?;
                eprintln!("{} seed={}", file.display(), c.seed);
            }
            Ok(())
        }
    }
}

fn budget(sec: Option<f64>, nodes: Option<u64>) -> anyhow::Result<(Option<Duration>, Option<u64>)> {
    if sec.is_some_and(|s| !(s > 0.0 && s.is_finite())) || nodes == Some(0) {
        bail!(Error::Config("budgets must be positive".into()));
    }
    Ok((sec.map(Duration::from_secs_f64), nodes))
}

fn solve_as<T: Scalar>(text: &str, method: Method, options: &SolveOptions, timings: bool) -> anyhow::Result<(String, bool)> {
    let inst: Instance<T> = instance_from_json(text)?;
    let report = run(method, &inst, options)?;
    let gap = report.gap.as_ref().map_or("-".into(), |g| format!("{:.4}", g.to_f64_lossy()));
    let bound = report.bound.as_ref().map_or("-".into(), |b| format!("{:.6}", b.to_f64_lossy()));
    eprintln!(
        "{:<20} value={:.6} bound={} gap={} wall_ms={}",
        method.to_string(),
        report.value.to_f64_lossy(),
        bound,
        gap,
        report.wall.as_millis()
    );
    let json = serde_json::to_string_pretty(&report.to_json(options, timings))? + "\n";
    Ok((json, report.partial()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    instance: PathBuf,
    method: String,
    cardinality: Option<usize>,
    budget_sec: Option<f64>,
    budget_nodes: Option<u64>,
    seed: u64,
    exact: bool,
    timings: bool,
    verbose: bool,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let method = Method::parse(&method)?;
    let (time_limit, max_nodes) = budget(budget_sec, budget_nodes)?;
    let options = SolveOptions { cardinality, seed, bnb: BnbOptions { max_nodes, time_limit, log: verbose, ..Default::default() } };
    let text = read(&instance)?;
    let (json, partial) = if exact {
        solve_as::<Exact>(&text, method, &options, timings)?
    } else {
        solve_as::<f64>(&text, method, &options, timings)?
    };
    emit(out.as_deref(), &json)?;
    if partial {
        bail!(Failure { code: 3, message: "budget exhausted; reported the best incumbent and bound".into() });
    }
    Ok(())
}

fn cmd_experiment(
    config: PathBuf,
    seed: Option<u64>,
    budget_sec: Option<f64>,
    budget_nodes: Option<u64>,
    out: PathBuf,
    timings: bool,
) -> anyhow::Result<()> {
    let mut spec: ExperimentSpec = serde_json::from_str(&read(&config)?)
        .map_err(|e| Error::Config(format!("{}: not an experiment spec ({e})", config.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    budget(budget_sec, budget_nodes)?;
    if budget_sec.is_some() {
        spec.budget_sec = budget_sec;
    }
    if budget_nodes.is_some() {
        spec.budget_nodes = budget_nodes;
    }
    let (written, failures) = run_experiment(&spec, &out, timings)?;
    for w in &written {
        eprintln!("wrote {w}");
    }
    if failures > 0 {
        eprintln!("{failures} rows failed; see their status column");
    }
    Ok(())
}

fn thread_pool() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("DFOPT_THREADS") else { return Ok(()) };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Config(format!("DFOPT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("sizing the worker pool")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_pool().and_then(|()| match cli.command {
        Command::Generate { config, cnf, seed, out } => cmd_generate(config, cnf, seed, out),
        Command::Solve { instance, method, cardinality, budget_sec, budget_nodes, seed, exact, timings, verbose, out } => {
            cmd_solve(instance, method, cardinality, budget_sec, budget_nodes, seed, exact, timings, verbose, out)
        }
        Command::Experiment { config, seed, budget_sec, budget_nodes, out, timings } => {
            cmd_experiment(config, seed, budget_sec, budget_nodes, out, timings)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dfopt: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

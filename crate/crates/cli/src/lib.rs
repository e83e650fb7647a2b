//! Experiment runner: reads a config, runs one subcommand, writes CSV/JSON
//! artifacts and a manifest into the output directory.

pub mod commands;
pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use commands::{Outcome, Status};
use config::ExperimentConfig;
use output::{hex_digest, Artifacts, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] exterior_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(exterior_core::Error::NonConvergence(_)) => 3,
            CliError::Core(exterior_core::Error::Divergence(_)) => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tabulate a radial barrier with its two-sided bounds.
    Barrier,
    /// Radial Dirichlet problem on an annulus by shooting.
    SolveRadial,
    /// Finite element Dirichlet problem on an annulus.
    SolveAnnulus,
    /// Exhaustion iterates for the exterior problem.
    Exhaust,
    /// Rearrangement of an annulus solve against the symmetrization bound.
    Rearrange,
    /// Sphere statistics, envelope and decay fit.
    Asymptotics,
    /// The cos(log log r) example.
    Counterexample,
    /// Run several experiments into one directory each.
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Barrier => "barrier",
            Command::SolveRadial => "solve-radial",
            Command::SolveAnnulus => "solve-annulus",
            Command::Exhaust => "exhaust",
            Command::Rearrange => "rearrange",
            Command::Asymptotics => "asymptotics",
            Command::Counterexample => "counterexample",
            Command::Suite => "suite",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        [
            Command::Barrier,
            Command::SolveRadial,
            Command::SolveAnnulus,
            Command::Exhaust,
            Command::Rearrange,
            Command::Asymptotics,
            Command::Counterexample,
            Command::Suite,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

#[derive(Debug, Parser)]
#[command(name = "exterior", version, about = "Exterior Dirichlet problem experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

/// Runs one experiment into `dir` and writes `summary.json` and `manifest.json`.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome, CliError> {
    let mut art = Artifacts::new(dir)?;
    let mut outcome = match command {
        Command::Barrier => commands::barrier(cfg, &mut art)?,
        Command::SolveRadial => commands::solve_radial(cfg, &mut art)?,
        Command::SolveAnnulus => commands::solve_annulus(cfg, seed, &mut art)?,
        Command::Exhaust => commands::exhaust(cfg, &mut art)?,
        Command::Rearrange => commands::rearrange_cmd(cfg, seed, &mut art)?,
        Command::Asymptotics => commands::asymptotics(cfg, &mut art)?,
        Command::Counterexample => commands::counterexample(cfg, &mut art)?,
        Command::Suite => return run_suite(cfg, seed, dir),
    };
    outcome.summary.insert("exit_code".into(), json!(outcome.status.exit_code()));
    art.json("summary.json", &Value::Object(outcome.summary.clone()))?;
    art.manifest(command.name(), &cfg.echo(), seed)?;
    Ok(outcome)
}

/// Experiments run by `suite` when no config is given.
pub const DEFAULT_SUITE: &[(&str, &str)] = &[
    ("asymptotics_exterior", "[experiment]\ncommand = asymptotics\n[operator]\np = 3\nn = 2\n[source]\nname = powerdecay:1:1\n[asymptotics]\nr_start = 1\ndoublings = 10\n"),
    ("barrier_lemma1", "[experiment]\ncommand = barrier\n[operator]\np = 3\nn = 2\n[barrier]\nfamily = lemma1\na = 1\nradius = 10\nr_min = 0.001\nr_max = 10\n"),
    ("barrier_lemma2", "[experiment]\ncommand = barrier\n[operator]\np = 3.5\nn = 2\ncoefficient = smooth-bump\n[source]\nname = powerdecay:1.5:0.5\n[barrier]\nfamily = lemma2\na = 0.5\nr_max = 1000\n"),
    ("counterexample_p2", "[experiment]\ncommand = counterexample\n[operator]\np = 2\nn = 3\n"),
    ("counterexample_p3", "[experiment]\ncommand = counterexample\n[operator]\np = 3\nn = 2\n"),
    ("exhaust_unit", "[experiment]\ncommand = exhaust\n[operator]\np = 3\nn = 2\n[source]\nname = powerdecay:1:1\n[boundary]\ninner = 1\n[exhaust]\nm_max = 6\nper_doubling = 8\n"),
    ("exhaust_zero", "[experiment]\ncommand = exhaust\n[operator]\np = 3\nn = 2\n[source]\nname = zero\n[boundary]\ninner = 0\n[exhaust]\nm_max = 4\nper_doubling = 8\n"),
    ("rearrange_annulus", "[experiment]\ncommand = rearrange\n[operator]\np = 2.5\nn = 3\n[source]\nname = const:2\n[geometry]\nr_in = 1\nr_out = 4\n[boundary]\ninner = 0.5\nouter = 0\n[rearrange]\nr_exp = 1\ns_exp = 2\n"),
    ("solve_annulus_polar", "[experiment]\ncommand = solve-annulus\n[operator]\np = 2.5\nn = 2\n[source]\nname = const:1\n[geometry]\nr_in = 1\nr_out = 4\n[boundary]\ninner = 1 + 0.5*cos(theta)\nouter = 0\n[solver]\nangles = 16\nper_doubling = 8\ninitial = random\n"),
    ("solve_radial", "[experiment]\ncommand = solve-radial\n[operator]\np = 3\nn = 3\n[source]\nname = const:1.5\n[geometry]\nr_in = 1\nr_out = 4\nu_in = 1\nu_out = 0\n"),
];

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(e.to_string()))?
        .map(|e| e.map(|e| e.path()).map_err(|e| CliError::Io(e.to_string())))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if rel == "manifest.json" {
                continue;
            }
            let bytes = std::fs::read(&p).map_err(|e| CliError::Io(e.to_string()))?;
            out.insert(rel, hex_digest(&bytes));
        }
    }
    Ok(())
}

/// Runs every listed experiment (in name order) into `dir/<name>/`, then
/// merges their summaries by name.
pub fn run_suite(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Outcome, CliError> {
    let mut experiments: BTreeMap<String, ExperimentConfig> = BTreeMap::new();
    match cfg.get("suite", "experiments") {
        Some(list) => {
            for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let path = cfg.resolve(item);
                let sub = ExperimentConfig::load(&path)?;
                let name = match sub.get("experiment", "name") {
                    Some(n) => n.to_string(),
                    None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| item.to_string()),
                };
                if experiments.insert(name.clone(), sub).is_some() {
                    return Err(CliError::Config(format!("duplicate experiment name '{name}'")));
                }
            }
        }
        None => {
            for (name, text) in DEFAULT_SUITE {
                experiments.insert(name.to_string(), ExperimentConfig::parse(text, &cfg.base_dir)?);
            }
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
    let mut merged = Map::new();
    let mut status = Status::Ok;
    let mut first_error: Option<i32> = None;
    for (name, sub) in &experiments {
        let command = sub
            .command()
            .and_then(Command::parse)
            .filter(|c| *c != Command::Suite)
            .ok_or_else(|| CliError::Config(format!("experiment '{name}' needs a valid [experiment] command")))?;
        let sub_seed = match sub.get("experiment", "seed") {
            Some(_) => sub.seed()?,
            None => seed,
        };
        match run_experiment(command, sub, sub_seed, &dir.join(name)) {
            Ok(o) => {
                status = status.max(o.status);
                merged.insert(name.clone(), Value::Object(o.summary));
            }
            Err(e) => {
                first_error.get_or_insert(e.exit_code());
                merged.insert(name.clone(), json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
            }
        }
    }
    let mut o = Outcome { summary: Map::new(), status };
    o.summary.insert("schema".into(), json!(SCHEMA));
    o.summary.insert("command".into(), json!("suite"));
    o.summary.insert("experiments".into(), Value::Object(merged));
    let code = first_error.unwrap_or(status.exit_code()).max(status.exit_code());
    o.summary.insert("exit_code".into(), json!(code));
    if let Some(c) = first_error {
        o.status = if c == 3 { Status::NonConverged.max(status) } else { Status::CheckFailed };
    }
    let mut art = Artifacts::new(dir)?;
    art.json("summary.json", &Value::Object(o.summary.clone()))?;
    collect_files(dir, dir, &mut art.files)?;
    art.manifest("suite", &cfg.echo(), seed)?;
    Ok(o)
}

fn print_summary(summary: &Map<String, Value>, prefix: &str) {
    for (k, v) in summary {
        match v {
            Value::Object(m) if k == "experiments" => {
                for (name, s) in m {
                    if let Value::Object(s) = s {
                        print_summary(s, &format!("{prefix}{name}."));
                    }
                }
            }
            Value::Array(_) | Value::Object(_) => {}
            _ => println!("{prefix}{k} = {v}"),
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = (|| -> Result<Outcome, CliError> {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::empty(),
        };
        if let Some(c) = cfg.command() {
            if c != cli.command.name() {
                return Err(CliError::Config(format!("config is for '{c}', not '{}'", cli.command.name())));
            }
        }
        let seed = match cli.seed {
            Some(s) => {
                cfg.set("experiment", "seed", s.to_string());
                s
            }
            None => cfg.seed()?,
        };
        run_experiment(cli.command, &cfg, seed, &cli.out)
    })();
    match result {
        Ok(o) => {
            if !cli.quiet {
                print_summary(&o.summary, "");
            }
            o.status.exit_code().max(o.summary.get("exit_code").and_then(|v| v.as_i64()).unwrap_or(0) as i32)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

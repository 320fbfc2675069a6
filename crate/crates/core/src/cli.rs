//! Command-line front end: single runs, parameter sweeps and the two standard
//! PDR experiments (attacker count and node speed).
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
//! internal failures such as unwritable output files.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run, run_full, write_positions, write_trust_trace, Metrics};
use crate::model::{validate_config, AttackKind, ConfigError, Protocol, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Internal(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "anct-sim", version, about = "MANET secure routing simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and print its summary row.
    Run(RunArgs),
    /// Run the cross product of varied values, protocols and seeds.
    Sweep(SweepArgs),
    /// Check a scenario file without running it.
    Validate(ScenarioArgs),
    /// Reproduce a standard PDR experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the summary CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every trust evaluation as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace_trust: Option<PathBuf>,
    /// Write node positions after every mobility tick as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace_positions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// `KEY=V1,V2,...`; `attackers` is accepted for `attacker_count`.
    #[arg(long)]
    pub vary: Option<String>,
    /// Comma-separated protocols.
    #[arg(long, default_value = "anct")]
    pub protocols: String,
    /// Seed list such as `1-10` or `1,4,9`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    /// PDR against attacker count at a fixed speed.
    Attackers,
    /// PDR against node speed with a fixed number of attackers.
    Mobility,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub kind: ExperimentKind,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "blackhole")]
    pub attack: String,
    /// Points on the x axis; defaults to 0,5,...,25 attackers or 10,...,50 m/s.
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long, default_value = "anct,baseline_aodv")]
    pub protocols: String,
    #[arg(long, default_value = "1-10")]
    pub seeds: String,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-run rows go here; the aggregate table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn parse_protocols(s: &str) -> Result<Vec<Protocol>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<Protocol>()
                .map_err(|_| CliError::Usage(format!("unknown protocol `{p}`")))
        })
        .collect()
}

fn canonical_key(key: &str) -> &str {
    match key {
        "attackers" => "attacker_count",
        other => other,
    }
}

fn parse_vary(s: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--vary expects KEY=V1,V2,..., got `{s}`")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Usage(format!("--vary `{s}` lists no values")));
    }
    Ok((canonical_key(key.trim()).to_string(), values))
}

/// Loads the scenario file (if any) and applies `--set` overrides.
pub fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                // A missing scenario is the user's mistake, not an internal one.
                CliError::Usage(format!("{}: {e}", path.display()))
            })?;
            ScenarioConfig::parse(&text)?
        }
        None => ScenarioConfig::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(canonical_key(k.trim()), v.trim())?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be > 0".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Internal(e.to_string()))
}

/// Validates every scenario up front, then runs them in parallel. Results
/// keep the input order, so output does not depend on the worker count.
pub fn run_batch(
    configs: Vec<ScenarioConfig>,
    workers: Option<usize>,
) -> Result<Vec<Metrics>, CliError> {
    let validated = configs
        .into_iter()
        .map(validate_config)
        .collect::<Result<Vec<_>, _>>()?;
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| validated.par_iter().map(run).collect()))
}

/// Mean, minimum and maximum PDR at one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub protocol: Protocol,
    pub attack: AttackKind,
    pub attackers: u32,
    pub speed: f64,
    pub runs: usize,
    pub pdr_mean: f64,
    pub pdr_min: f64,
    pub pdr_max: f64,
}

impl PointSummary {
    pub const CSV_HEADER: &'static str =
        "protocol,attack,attackers,speed,runs,pdr_mean,pdr_min,pdr_max";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{:.4},{:.4}",
            self.protocol.as_str(),
            self.attack.as_str(),
            self.attackers,
            self.speed,
            self.runs,
            self.pdr_mean,
            self.pdr_min,
            self.pdr_max
        )
    }
}

/// Groups runs by (protocol, attack, attackers, speed) in first-seen order.
pub fn aggregate(runs: &[Metrics]) -> Vec<PointSummary> {
    let mut out: Vec<(PointSummary, Vec<f64>)> = Vec::new();
    for m in runs {
        let pos = out.iter().position(|(p, _)| {
            p.protocol == m.protocol
                && p.attack == m.attack
                && p.attackers == m.attackers
                && p.speed == m.speed
        });
        let i = match pos {
            Some(i) => i,
            None => {
                out.push((
                    PointSummary {
                        protocol: m.protocol,
                        attack: m.attack,
                        attackers: m.attackers,
                        speed: m.speed,
                        runs: 0,
                        pdr_mean: 0.0,
                        pdr_min: 0.0,
                        pdr_max: 0.0,
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        out[i].1.push(m.pdr());
    }
    out.into_iter()
        .map(|(mut p, v)| {
            p.runs = v.len();
            p.pdr_mean = v.iter().sum::<f64>() / v.len() as f64;
            p.pdr_min = v.iter().copied().fold(f64::INFINITY, f64::min);
            p.pdr_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            p
        })
        .collect()
}

/// Scenario list for an experiment: every point, protocol and seed.
pub fn experiment_configs(
    base: &ScenarioConfig,
    kind: ExperimentKind,
    attack: AttackKind,
    points: &[f64],
    protocols: &[Protocol],
    seeds: &[u64],
) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for &x in points {
        for &protocol in protocols {
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.protocol = protocol;
                cfg.rng_seed = seed;
                match kind {
                    ExperimentKind::Attackers => {
                        cfg.attacker_count = x as u32;
                        cfg.attack_kind = if x == 0.0 { AttackKind::None } else { attack };
                    }
                    ExperimentKind::Mobility => {
                        cfg.speed = x;
                        cfg.attack_kind = attack;
                        if attack == AttackKind::None {
                            cfg.attacker_count = 0;
                        }
                    }
                }
                out.push(cfg);
            }
        }
    }
    out
}

fn cmd_run(args: RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let cfg = validate_config(cfg)?;
    let output = run_full(&cfg, args.trace_positions.is_some());
    if let Some(path) = &args.trace_trust {
        write_file(path, |w| write_trust_trace(w, &output.trust_trace))?;
    }
    if let Some(path) = &args.trace_positions {
        write_file(path, |w| write_positions(w, &output.positions))?;
    }
    let text = format!("{}\n{}\n", Metrics::CSV_HEADER, output.metrics.csv_row());
    match &args.out {
        Some(path) => write_file(path, |w| w.write_all(text.as_bytes())),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let base = load_scenario(&args.scenario)?;
    let protocols = parse_protocols(&args.protocols)?;
    let seeds = parse_seeds(&args.seeds)?;
    let (key, values) = match &args.vary {
        Some(v) => {
            let (k, vs) = parse_vary(v)?;
            (Some(k), vs)
        }
        None => (None, vec![String::new()]),
    };
    let mut configs = Vec::new();
    for v in &values {
        for &protocol in &protocols {
            for &seed in &seeds {
                let mut cfg = base.clone();
                if let Some(k) = &key {
                    cfg.set(k, v)?;
                }
                cfg.protocol = protocol;
                cfg.rng_seed = seed;
                configs.push(cfg);
            }
        }
    }
    let results = run_batch(configs, args.workers)?;
    let mut text = String::from(Metrics::CSV_HEADER);
    text.push('\n');
    for m in &results {
        text.push_str(&m.csv_row());
        text.push('\n');
    }
    match &args.out {
        Some(path) => write_file(path, |w| w.write_all(text.as_bytes())),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn cmd_validate(args: ScenarioArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = validate_config(load_scenario(&args)?)?;
    writeln!(
        stdout,
        "ok: {} nodes, {} attackers ({}), protocol {}",
        cfg.node_count,
        cfg.effective_attackers(),
        cfg.attack_kind.as_str(),
        cfg.protocol.as_str()
    )
    .map_err(|e| CliError::Internal(e.to_string()))
}

fn parse_points(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::Usage(format!("bad point `{p}`")))
        })
        .collect()
}

fn cmd_experiment(args: ExperimentArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut base = load_scenario(&args.scenario)?;
    let attack: AttackKind = args
        .attack
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown attack `{}`", args.attack)))?;
    let points = match (&args.points, args.kind) {
        (Some(p), _) => parse_points(p)?,
        (None, ExperimentKind::Attackers) => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
        (None, ExperimentKind::Mobility) => vec![10.0, 20.0, 30.0, 40.0, 50.0],
    };
    if args.kind == ExperimentKind::Mobility && !args.scenario.overrides.iter().any(|o| {
        o.split_once('=')
            .is_some_and(|(k, _)| canonical_key(k.trim()) == "attacker_count")
    }) {
        base.attacker_count = 10;
    }
    let protocols = parse_protocols(&args.protocols)?;
    let seeds = parse_seeds(&args.seeds)?;
    let configs = experiment_configs(&base, args.kind, attack, &points, &protocols, &seeds);
    let results = run_batch(configs, args.workers)?;

    if let Some(path) = &args.out {
        write_file(path, |w| {
            writeln!(w, "{}", Metrics::CSV_HEADER)?;
            for m in &results {
                writeln!(w, "{}", m.csv_row())?;
            }
            Ok(())
        })?;
    }
    let internal = |e: io::Error| CliError::Internal(e.to_string());
    writeln!(stdout, "{}", PointSummary::CSV_HEADER).map_err(internal)?;
    for p in aggregate(&results) {
        writeln!(stdout, "{}", p.csv_row()).map_err(internal)?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and executes the command.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Run(a) => cmd_run(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Validate(a) => cmd_validate(a, stdout),
        Command::Experiment(a) => cmd_experiment(a, stdout),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // Help and version requests are successful exits, not usage errors.
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = e.print();
            return 0;
        }
    }
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(args, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("anct-sim: {e}");
            e.exit_code()
        }
    }
}

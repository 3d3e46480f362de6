use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use thiserror::Error;

use tump::evaluation::{self, budget_for, EvalError, DEFAULT_TAU_KBPS};
use tump::io::{self as tio, FormatError};
use tump::solvers::DEFAULT_ENUMERATION_CAP;
use tump::{build_instance, generate_scenario, solve, Algorithm, GenError, ModelError, Preset, SolveError, Topology};

/// Pick base-stations to upgrade so user trajectories clear a QoE threshold.
#[derive(Debug, Parser)]
#[command(name = "tump", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario: trace.jsonl, stations.jsonl, manifest.json.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
    Generate {
        /// star, mesh, nyc-like, atlanta-like or bangalore-like
        #[arg(long)]
        preset: Option<String>,
        /// TOML scenario config
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the topology of the preset or config.
        #[arg(long)]
        topology: Option<Topology>,
        /// Overrides every seed of the preset or config.
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplies trajectory, home, office and station counts.
        #[arg(long)]
        scale: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose stations to upgrade on a trace.
    #[command(group(ArgGroup::new("budget").required(true).args(["k", "k_prime"])))]
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long = "k-prime")]
        k_prime: Option<f64>,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_TAU_KBPS)]
        tau: f64,
        /// Largest number of subsets the exact solver may enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        /// Upgraded station list, one per line; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep described by a TOML spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ratio table: one results file against SimG, or two files cell by cell.
    Compare {
        #[arg(required = true, num_args = 1..=2)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
#[error("{message}")]
struct CliError {
    code: u8,
    message: String,
}

const PARSE: u8 = 2;
const VALIDATION: u8 = 3;
const CAP: u8 = 4;
const IO: u8 = 5;

fn fail(code: u8, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    fail(IO, format!("{}: {e}", path.display()))
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let code = match &e {
            FormatError::Io(_) => IO,
            FormatError::UnknownStation(_) | FormatError::UnnamedStation(_) => VALIDATION,
            _ => PARSE,
        };
        fail(code, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        fail(VALIDATION, e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        fail(VALIDATION, e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::EnumerationCap { .. } => CAP,
            _ => VALIDATION,
        };
        fail(code, e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Format(f) => f.into(),
            EvalError::Model(m) => m.into(),
            EvalError::Solve(s) => s.into(),
            EvalError::Generate(g) => g.into(),
            EvalError::Csv(c) if c.is_io_error() => fail(IO, c.to_string()),
            EvalError::Csv(c) => fail(PARSE, format!("csv: {c}")),
            other => fail(VALIDATION, other.to_string()),
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    fs::File::open(path).map(BufReader::new).map_err(|e| io_error(path, e))
}

fn generate(
    preset: Option<String>,
    config: Option<PathBuf>,
    topology: Option<Topology>,
    seed: Option<u64>,
    scale: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut cfg = match (preset, config) {
        (Some(name), _) => name.parse::<Preset>().map_err(|e| fail(VALIDATION, e))?.config(seed.unwrap_or(0)),
        (None, Some(path)) => tio::parse_scenario_config(&read_text(&path)?)?,
        (None, None) => unreachable!("clap enforces a source"),
    };
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = topology {
        cfg.topology = t;
    }
    if let Some(f) = scale {
        if !(f.is_finite() && f > 0.0) {
            return Err(fail(VALIDATION, format!("--scale {f} must be positive")));
        }
        cfg = cfg.scaled(f);
    }
    let scenario = generate_scenario(&cfg)?;
    let files = tio::render_scenario(&cfg, &scenario)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    write_atomic(&out.join("trace.jsonl"), files.trace.as_bytes())?;
    write_atomic(&out.join("stations.jsonl"), files.stations.as_bytes())?;
    write_atomic(&out.join("manifest.json"), files.manifest.as_bytes())?;
    println!(
        "generated {} trajectories over {} stations ({}, seed {}) in {}",
        scenario.trajectories.len(),
        scenario.stations.len(),
        cfg.topology,
        cfg.seed,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_cmd(
    input: &Path,
    algo: Algorithm,
    k: Option<usize>,
    k_prime: Option<f64>,
    gamma: f64,
    tau: f64,
    cap: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let trace = tio::read_trace(open(input)?, None)?;
    let probe = build_instance(&trace.trajectories, tau, gamma, 0)?;
    let k = match (k, k_prime) {
        (Some(k), _) => k,
        (None, Some(f)) if f > 0.0 && f <= 1.0 => budget_for(f, probe.n()),
        (None, Some(f)) => return Err(fail(VALIDATION, format!("--k-prime {f} outside (0, 1]"))),
        (None, None) => unreachable!("clap enforces a budget"),
    };
    let report = solve(&probe.with_budget(k), algo, cap)?;
    let list = tio::render_station_list(report.solution.upgraded.iter().copied(), &trace.registry)?;
    match &out {
        Some(path) => write_atomic(path, list.as_bytes())?,
        None => print!("{list}"),
    }
    println!(
        "{algo} k={k} gamma={gamma} tau={tau} satisfied={}/{} elapsed_ms={:.3}",
        report.solution.satisfied_count,
        probe.m(),
        report.elapsed.as_secs_f64() * 1000.0
    );
    Ok(())
}

fn sweep(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec = evaluation::parse_sweep_spec(&read_text(spec_path)?)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let trajectories = spec.load(base)?;
    let result = evaluation::run_sweep(&spec, &trajectories)?;
    write_atomic(out, evaluation::sweep_to_string(&result).as_bytes())?;
    let skipped = result.rows.iter().filter(|r| !r.is_ok()).count();
    println!("wrote {} rows ({skipped} skipped) to {}", result.rows.len(), out.display());
    Ok(())
}

fn compare(results: &[PathBuf], out: Option<PathBuf>) -> Result<(), CliError> {
    let load = |p: &PathBuf| -> Result<_, CliError> {
        evaluation::read_sweep_csv(open(p)?).map_err(|e| {
            let mut err = CliError::from(e);
            err.message = format!("{}: {}", p.display(), err.message);
            err
        })
    };
    let rows = match results {
        [single] => evaluation::compare_report(&load(single)?)?,
        [a, b] => evaluation::compare_results(&load(a)?, &load(b)?)?,
        _ => unreachable!("clap limits the file count"),
    };
    let text = evaluation::comparison_to_string(&rows);
    match out {
        Some(path) => write_atomic(&path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            preset,
            config,
            topology,
            seed,
            scale,
            out,
        } => generate(preset, config, topology, seed, scale, &out),
        Command::Solve {
            input,
            algo,
            k,
            k_prime,
            gamma,
            tau,
            cap,
            out,
        } => solve_cmd(&input, algo, k, k_prime, gamma, tau, cap, out),
        Command::Sweep { spec, out } => sweep(&spec, &out),
        Command::Compare { results, out } => compare(&results, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

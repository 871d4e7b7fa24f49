//! Command-line front end.
//!
//! Exit codes: 0 when every report row passes, 1 when some row fails, 2 on
//! operational errors (I/O, refusing to overwrite, numerical failures) and
//! 64 on usage, schema or validation errors.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, ExperimentKind, Parameters, RunConfig, SCHEMA_HELP, THREADS_ENV};
use crate::error::{Error, Result};
use crate::experiments;
use crate::report::{self, ExperimentReport, Format};
use crate::selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "subgauss",
    version,
    about = "Monte Carlo checks of subgaussian norms of bounded maps of Gaussian vectors",
    after_help = SCHEMA_HELP
)]
struct Cli {
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file and SUBGAUSS_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Overwrite existing output files
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (speed only; results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norm of φ(X) across dimensions and condition numbers
    Theorem(TheoremArgs),
    /// Norm of sgn(Wx) for Gaussian W, with the row split
    Corollary(CorollaryArgs),
    /// Condition numbers of half-height Gaussian blocks
    Wishart(WishartArgs),
    /// Rank-one covariance, where the norm grows like √n
    Counterexample(CounterexampleArgs),
    /// All four experiments
    All,
    /// Closed-form oracle checks
    Selftest,
}

#[derive(Args, Debug)]
struct TheoremArgs {
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    maps: Option<Vec<String>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
}

#[derive(Args, Debug)]
struct CorollaryArgs {
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    w_draws: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
}

#[derive(Args, Debug)]
struct WishartArgs {
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        match self {
            Command::Theorem(_) => Some(ExperimentKind::Theorem),
            Command::Corollary(_) => Some(ExperimentKind::Corollary),
            Command::Wishart(_) => Some(ExperimentKind::Wishart),
            Command::Counterexample(_) => Some(ExperimentKind::Counterexample),
            Command::All => Some(ExperimentKind::All),
            Command::Selftest => None,
        }
    }

    fn apply_overrides(self, parameters: &mut Parameters) {
        match (self, parameters) {
            (Command::Theorem(a), Parameters::Theorem(c)) => {
                set(&mut c.dims, a.dims);
                set(&mut c.kappas, a.kappas);
                set(&mut c.maps, a.maps);
                set(&mut c.samples, a.samples);
                set(&mut c.directions, a.directions);
            }
            (Command::Corollary(a), Parameters::Corollary(c)) => {
                set(&mut c.dims, a.dims);
                set(&mut c.w_draws, a.w_draws);
                set(&mut c.samples, a.samples);
                set(&mut c.directions, a.directions);
            }
            (Command::Wishart(a), Parameters::Wishart(c)) => {
                set(&mut c.dims, a.dims);
                set(&mut c.trials, a.trials);
                set(&mut c.threshold, a.threshold);
            }
            (Command::Counterexample(a), Parameters::Counterexample(c)) => {
                set(&mut c.dims, a.dims);
                set(&mut c.samples, a.samples);
                set(&mut c.directions, a.directions);
            }
            _ => {}
        }
    }
}

/// Maps an error to its exit code.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Schema { .. } | Error::Validation { .. } | Error::UnknownMap(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

fn fail(error: Error) -> i32 {
    eprintln!("error: {error}");
    let code = exit_code(&error);
    if code == EXIT_USAGE {
        eprintln!("\n{SCHEMA_HELP}");
    }
    code
}

/// Runs one configured experiment, or all four in order.
pub fn run_experiments(cfg: &RunConfig) -> Result<Vec<ExperimentReport>> {
    let echo = cfg.to_json()?;
    let mut reports = match &cfg.parameters {
        Parameters::Theorem(c) => vec![experiments::run_theorem_experiment(c)?],
        Parameters::Corollary(c) => vec![experiments::run_corollary_experiment(c)?],
        Parameters::Wishart(c) => vec![experiments::run_wishart_conditioning(c)?],
        Parameters::Counterexample(c) => vec![experiments::run_counterexample(c)?],
        Parameters::All(c) => vec![
            experiments::run_theorem_experiment(&c.theorem)?,
            experiments::run_corollary_experiment(&c.corollary)?,
            experiments::run_wishart_conditioning(&c.wishart)?,
            experiments::run_counterexample(&c.counterexample)?,
        ],
    };
    for r in &mut reports {
        r.metadata.config = echo.clone();
    }
    Ok(reports)
}

fn report_names(kind: ExperimentKind) -> Vec<&'static str> {
    match kind {
        ExperimentKind::All => vec![
            experiments::theorem::NAME,
            experiments::corollary::NAME,
            experiments::wishart::NAME,
            experiments::counterexample::NAME,
        ],
        k => vec![k.as_str()],
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::validation(THREADS_ENV, s, "thread count must be a non-negative integer")),
        Err(_) => Ok(None),
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn selftest_main(seed: u64, threads: Option<usize>) -> Result<i32> {
    let checks = in_pool(threads, || selftest::run_selftest(seed))??;
    let mut all = true;
    for c in &checks {
        println!(
            "{} {}: deviation {:.3e} (tolerance {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.deviation,
            c.tolerance
        );
        all &= c.pass;
    }
    Ok(if all { EXIT_OK } else { EXIT_FAILED })
}

fn build_config(cli: &Cli, kind: ExperimentKind) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg = config::parse_config(&text)?;
            if cfg.experiment() != kind {
                return Err(Error::validation(
                    "experiment",
                    cfg.experiment().as_str(),
                    format!("config file is for a different experiment than the `{}` subcommand", kind.as_str()),
                ));
            }
            cfg
        }
        None => RunConfig::defaults(kind)?,
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    set(&mut cfg.output_dir, cli.out.clone());
    set(&mut cfg.format, cli.format.map(Format::from));
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<i32> {
    let threads = thread_count(cli.threads)?;
    let Some(kind) = cli.command.kind() else {
        let seed = match cli.seed {
            Some(s) => s,
            None => RunConfig::defaults(ExperimentKind::Counterexample)?.seed,
        };
        return selftest_main(seed, threads);
    };
    let mut cfg = build_config(&cli, kind)?;
    cli.command.apply_overrides(&mut cfg.parameters);
    cfg.validate()?;
    let paths: Vec<PathBuf> = report_names(kind)
        .into_iter()
        .flat_map(|name| report::output_paths(name, cfg.format, &cfg.output_dir))
        .collect();
    report::check_outputs_free(&paths, cli.force)?;
    let started = Instant::now();
    let reports = in_pool(threads, || run_experiments(&cfg))??;
    let mut all_pass = true;
    for r in &reports {
        let written = report::emit_report(r, cfg.format, &cfg.output_dir, cli.force)?;
        let failures: Vec<&str> = r.failures().map(|row| row.cell.as_str()).collect();
        println!(
            "{}: {} rows, {} failed -> {}",
            r.experiment,
            r.rows.len(),
            failures.len(),
            written[0].display()
        );
        for row in r.failures() {
            println!(
                "  FAIL {} {} value={} ci=[{}, {}] bound={:?}",
                row.cell, row.estimator, row.value, row.ci_low, row.ci_high, row.bound
            );
        }
        all_pass &= failures.is_empty();
    }
    eprintln!("finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILED })
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => {
                    eprintln!("\n{SCHEMA_HELP}");
                    EXIT_USAGE
                }
            };
        }
    };
    match main_inner(cli) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}

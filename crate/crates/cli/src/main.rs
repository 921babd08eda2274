//! Command-line front end: one job per invocation.

mod job;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use trotter_bound::Error;

use job::{JobSpec, SectorChoice, Task};
use tasks::Series;

#[derive(Parser)]
#[command(name = "trotter-bound", version, about = "Second-order Trotter error bounds for diagonal-Coulomb Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Hamiltonian and write it as JSON.
    Build(JobArgs),
    /// Exact and absolute-value spectral norms on the sector.
    ExactNorm(JobArgs),
    /// Sign-free FCIQMC estimate of one commutator norm.
    McNorm(JobArgs),
    /// Exact worst-case Trotter error against the commutator bound.
    TrotterError(JobArgs),
    /// Trotter error norms, L1 and triangle bounds, step counts.
    Bounds(JobArgs),
    /// FCIQMC at several populations, extrapolated to infinite population.
    BiasSweep(JobArgs),
    /// Exact against absolute norms for the eight reference systems.
    Table1(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 1 keeps every stochastic path deterministic.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Lanczos tolerance for `table1`.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Args)]
struct JobArgs {
    /// JSON job file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `fciqmc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity(_) => 3,
        Error::Convergence { .. } => 4,
        Error::Extinction(_) | Error::Overflow { .. } => 5,
        Error::Fit(_) => 6,
        Error::Io(_) | Error::Json(_) => 7,
        Error::Config(_)
        | Error::InvalidLattice(_)
        | Error::InvalidGrid(_)
        | Error::InvalidHamiltonian(_)
        | Error::InvalidSector(_)
        | Error::SectorMismatch(_)
        | Error::Excitation(_)
        | Error::Rank(_)
        | Error::Applicability(_) => 2,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Capacity(_) => "capacity",
        Error::Convergence { .. } => "convergence",
        Error::Extinction(_) => "extinction",
        Error::Overflow { .. } => "overflow",
        Error::Fit(_) => "fit",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        _ => "validation",
    }
}

fn task_of(cmd: &Command) -> (Task, &'static str) {
    match cmd {
        Command::Build(_) => (Task::Build, "build"),
        Command::ExactNorm(_) => (Task::ExactNorm, "exact-norm"),
        Command::McNorm(_) => (Task::McNorm, "mc-norm"),
        Command::TrotterError(_) => (Task::TrotterErrorExact, "trotter-error"),
        Command::Bounds(_) => (Task::Bounds, "bounds"),
        Command::BiasSweep(_) => (Task::BiasSweep, "bias-sweep"),
        Command::Table1(_) => unreachable!(),
    }
}

fn set_threads(n: usize) -> Result<(), Error> {
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn write_report(out: &Path, report: &Value) -> Result<(), Error> {
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

fn run_job(cmd: &Command, args: &JobArgs) -> Result<(), Error> {
    let (task, name) = task_of(cmd);
    set_threads(args.threads)?;
    std::fs::create_dir_all(&args.out)?;
    let text = std::fs::read_to_string(&args.config)?;
    let mut job = JobSpec::from_json(&text).map_err(|e| match e {
        Error::Json(j) => Error::Config(format!("{}: {j}", args.config.display())),
        other => other,
    })?;
    if let Some(t) = job.task {
        if t != task {
            return Err(Error::Config(format!("the job asks for task {t:?} but `{name}` was invoked")));
        }
    }
    job.task = Some(task);
    if let Some(seed) = args.seed {
        job.fciqmc.seed = seed;
    }
    job.fciqmc.parallel = args.threads > 1;
    job.validate(task)?;
    job.fciqmc.validate()?;

    let h = job.system.build()?;
    let sector = job.sector.resolve(h.n_spatial)?;
    job.sector = SectorChoice::Counts { n_up: sector.n_up, n_down: sector.n_down };

    let outcome = tasks::execute(task, &job, &h, sector, &args.out)?;
    match &outcome.series {
        Some(Series::Run(r)) => r.write_csv(&args.out.join("series.csv"))?,
        Some(Series::Table(t)) => std::fs::write(args.out.join("series.csv"), t)?,
        None => {}
    }
    let report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "threads": args.threads,
        "job": job,
        "result": outcome.result,
    });
    write_report(&args.out, &report)
}

fn run_table1(args: &CommonArgs) -> Result<(), Error> {
    set_threads(args.threads)?;
    std::fs::create_dir_all(&args.out)?;
    let (rows, failures) = tasks::table1(args.tolerance)?;
    std::fs::write(args.out.join("series.csv"), tasks::table1_csv(&rows))?;
    println!("{:<32} {:>14} {:>14} {:>8} {:>14} {:>14} {:>8}", "system", "VTV exact", "VTV abs", "%", "VTT exact", "VTT abs", "%");
    for r in &rows {
        println!(
            "{:<32} {:>14.7e} {:>14.7e} {:>8.3} {:>14.7e} {:>14.7e} {:>8.3}",
            r.system, r.vtv_exact, r.vtv_abs, r.vtv_percent, r.vtt_exact, r.vtt_abs, r.vtt_percent
        );
    }
    let failed: Vec<Value> = failures.iter().map(|(s, e)| json!({"system": s, "error": e.to_string()})).collect();
    let report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": "table1",
        "threads": args.threads,
        "tolerance": args.tolerance,
        "result": { "rows": rows, "failed": failed, "partial": !failures.is_empty() },
    });
    write_report(&args.out, &report)?;
    match failures.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Table1(a) => (run_table1(a), a.out.clone()),
        Command::Build(a)
        | Command::ExactNorm(a)
        | Command::McNorm(a)
        | Command::TrotterError(a)
        | Command::Bounds(a)
        | Command::BiasSweep(a) => (run_job(&cli.command, a), a.out.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let body = json!({ "error": error_kind(&e), "message": e.to_string(), "exit_code": code });
            eprintln!("{body}");
            if out.is_dir() {
                let _ = std::fs::write(out.join("error.json"), body.to_string() + "\n");
            }
            ExitCode::from(code)
        }
    }
}

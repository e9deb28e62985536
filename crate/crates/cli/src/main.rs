//! `mixtop`: topological invariants of thermal and tabulated Gaussian states.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure (any task).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mixtop_cli::commands::{self, Command, Context, RunError};
use mixtop_cli::config::{Format, RunConfig};
use mixtop_cli::manifest::{now_unix, RunManifest, TaskStatus};

#[derive(Debug, Parser)]
#[command(name = "mixtop", version, about = "Topological invariants of Gaussian mixed states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Key-value configuration file; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `jobs`).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output format (overrides `format`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

fn configure_threads(jobs: Option<usize>) -> Result<(), RunError> {
    let Some(n) = jobs else { return Ok(()) };
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Config(format!("key `jobs`: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if n > 1 {
            eprintln!("warning: built without the `parallel` feature; --jobs {n} runs on one thread");
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<i32, RunError> {
    let started = now_unix();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    cfg.validate()?;
    configure_threads(cfg.jobs)?;

    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)
        .map_err(|e| RunError::Config(format!("cannot create output directory {}: {e}", out.display())))?;
    let format = cfg.format.unwrap_or_default();
    let mut ctx = Context::new(cfg, out.clone(), format)?;

    let outcome = commands::run(cli.command, &mut ctx);
    let (tasks, error) = match outcome {
        Ok(tasks) => (tasks, None),
        Err(e) => (Vec::new(), Some(e)),
    };
    let mut not_ok = 0;
    for t in tasks.iter().filter(|t| t.status != TaskStatus::Ok) {
        not_ok += 1;
        eprintln!("task {} {:?}: {}", t.name, t.status, t.message.as_deref().unwrap_or(""));
    }
    let exit_code = match &error {
        Some(e) => e.exit_code(),
        None if not_ok == 0 => 0,
        None => 3,
    };
    let manifest = RunManifest {
        tool: "mixtop".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: mixtop::VERSION.into(),
        command: cli.command.name().into(),
        format,
        parallel: mixtop_cli::PARALLEL,
        jobs: ctx.cfg.jobs,
        config: ctx.cfg.clone(),
        gap: ctx.known_gap(),
        started_unix: started,
        finished_unix: now_unix(),
        tasks,
        outputs: ctx.written.clone(),
        exit_code,
    };
    manifest
        .write(&out)
        .map_err(|e| RunError::Numerical(format!("cannot write manifest: {e}")))?;
    if let Some(e) = error {
        return Err(e);
    }
    println!(
        "{}: {} tasks, {} not ok, {} files in {}",
        cli.command.name(),
        manifest.tasks.len(),
        not_ok,
        manifest.outputs.len() + 1,
        out.display()
    );
    Ok(exit_code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

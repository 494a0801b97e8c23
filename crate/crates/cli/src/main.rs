//! `contact-newton` command-line tool.
//!
//! * `run`: simulate a scene and write `metrics.csv` and snapshots;
//! * `bench`: compare correction schemes over mesh resolutions;
//! * `verify`: run the algebraic and complementarity checks on a scene.
//!
//! Usage errors exit with status 2, runtime errors with status 1.
//! `CONTACT_NEWTON_THREADS` sets the worker thread count (default 1).

mod bench;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use contact_newton::scene::{self, load_scene, MetricsWriter, Scene, SnapshotWriter, StepSink, VerifyOptions};
use contact_newton::solver::Scheme;

#[derive(Parser)]
#[command(name = "contact-newton", version, about = "Implicit FE contact simulation with recursive constraint correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene for a number of steps.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Overrides `newton.scheme` from the scene file.
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time the correction schemes over several mesh resolutions.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Delassus identity, complementarity and scheme equivalence.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, hide = true)]
        corrupt_wg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Single,
    Standard,
    Fast,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Single => Scheme::Single,
            SchemeArg::Standard => Scheme::Standard,
            SchemeArg::Fast => Scheme::Fast,
        }
    }
}

fn thread_count() -> Result<usize, String> {
    match std::env::var("CONTACT_NEWTON_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("CONTACT_NEWTON_THREADS must be a positive integer, got `{v}`")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start worker threads: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Run { scene, steps, scheme, out } => cmd_run(scene, steps as usize, scheme.map(Scheme::from), out),
        Command::Bench { spec, out } => bench::cmd_bench(&spec, out),
        Command::Verify { scene, corrupt_wg } => cmd_verify(scene, corrupt_wg),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(path: PathBuf, steps: usize, scheme: Option<Scheme>, out: PathBuf) -> Result<bool> {
    let config = load_scene(&path)?;
    let output = config.output;
    let mut scene = Scene::new(config)?;
    if let Some(s) = scheme {
        scene.set_scheme(s);
    }
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut snapshots = output.snapshots.then(|| SnapshotWriter::new(&out, output.every)).transpose()?;
    let mut metrics = output.metrics.then(|| MetricsWriter::create(&out)).transpose()?;
    let mut sinks: Vec<&mut dyn StepSink> = Vec::new();
    if let Some(s) = snapshots.as_mut() {
        sinks.push(s);
    }
    if let Some(m) = metrics.as_mut() {
        sinks.push(m);
    }
    let reports = scene::run(&mut scene, steps, &mut sinks)?;
    let worst = reports.iter().map(|r| r.penetration_after).fold(0.0, f64::max);
    let wall: f64 = reports.iter().map(|r| r.timings.total.as_secs_f64()).sum();
    println!(
        "{} steps of {} with the {} scheme: t = {:.4} s, max end-of-step penetration {:.3e} m, {:.3} s wall",
        reports.len(),
        path.display(),
        scene.config().newton.scheme,
        scene.snapshot().time,
        worst,
        wall
    );
    println!("output written to {}", out.display());
    Ok(true)
}

fn cmd_verify(path: PathBuf, corrupt_wg: bool) -> Result<bool> {
    let scene = Scene::new(load_scene(&path)?)?;
    let checks = scene::verify_scene(&scene, VerifyOptions { corrupt_wg })?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

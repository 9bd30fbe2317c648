use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::Point2;
use serde::Serialize;

use navsim::harness::{self, HarnessError};
use navsim::map::load_map;
use navsim::navigation::{plan_path, NavConfig, PlanError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_GOAL_NOT_REACHED: u8 = 3;

#[derive(Parser)]
#[command(name = "navsim", version, about = "Deterministic 2D localization and navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan a path on a map image and print it as JSON.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, value_parser = parse_point)]
        start: Point2<f64>,
        #[arg(long, value_parser = parse_point)]
        goal: Point2<f64>,
        /// Clearance kept from occupied cells, meters.
        #[arg(long, default_value_t = NavConfig::default().inflation_radius)]
        inflation: f64,
    },
    /// Run every scenario file in a directory.
    Batch {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-render render.svg of a finished run directory.
    Render {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point2<f64>, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Point2::new(parse(x)?, parse(y)?))
}

/// A failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn harness_failure(e: HarnessError) -> Failure {
    let code = match e {
        HarnessError::Parse { .. } | HarnessError::Invalid(_) => EXIT_VALIDATION,
        HarnessError::Io { .. } | HarnessError::Runtime { .. } | HarnessError::Csv { .. } => EXIT_RUNTIME,
    };
    Failure { code, error: e.into() }
}

#[derive(Serialize)]
struct RunSummary {
    scenario: String,
    status: &'static str,
    exit_code: u8,
    goal_reached: Option<bool>,
    message: Option<String>,
}

/// Runs one scenario into `out`; the outcome is the exit code.
fn simulate(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<harness::MetricsReport, Failure> {
    let mut prepared = harness::load_scenario(scenario).map_err(harness_failure)?;
    if let Some(seed) = seed {
        prepared.scenario.seed = seed;
    }
    let output = harness::run_scenario(&prepared).map_err(harness_failure)?;
    harness::write_outputs(out, &prepared, &output).map_err(harness_failure)?;
    if prepared.scenario.require_goal && !output.metrics.goal_reached {
        return Err(Failure {
            code: EXIT_GOAL_NOT_REACHED,
            error: anyhow::anyhow!("goal not reached; artifacts written to {}", out.display()),
        });
    }
    Ok(output.metrics)
}

fn plan(map: &Path, meta: &Path, start: Point2<f64>, goal: Point2<f64>, inflation: f64) -> Result<(), Failure> {
    let validation = |e: anyhow::Error| Failure { code: EXIT_VALIDATION, error: e };
    let grid = load_map(map, meta).with_context(|| format!("loading {}", map.display())).map_err(validation)?;
    let path =
        plan_path(&grid, &HashSet::new(), start, goal, inflation).map_err(|e: PlanError| validation(e.into()))?;
    let Some(path) = path else {
        return Err(Failure {
            code: EXIT_RUNTIME,
            error: anyhow::anyhow!("no path from ({}, {}) to ({}, {})", start.x, start.y, goal.x, goal.y),
        });
    };
    #[derive(Serialize)]
    struct PlanOutput {
        cost_cells: f64,
        length_m: f64,
        axial_steps: usize,
        diagonal_steps: usize,
        waypoints: Vec<[f64; 2]>,
    }
    let report = PlanOutput {
        cost_cells: path.cost(),
        length_m: path.cost() * grid.resolution(),
        axial_steps: path.axial_steps,
        diagonal_steps: path.diagonal_steps,
        waypoints: path.points(&grid).iter().map(|p| [p.x, p.y]).collect(),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
    Ok(())
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no scenario files (*.json) in {}", dir.display());
    }
    Ok(files)
}

/// Runs scenarios on `jobs` worker threads, one output directory each, and
/// writes summary.json. The exit code is the first nonzero code in file order.
fn batch(scenarios: &Path, out: &Path, jobs: usize) -> Result<u8, Failure> {
    let runtime = |e: anyhow::Error| Failure { code: EXIT_RUNTIME, error: e };
    let files = scenario_files(scenarios).map_err(|e| Failure { code: EXIT_VALIDATION, error: e })?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunSummary>>> = Mutex::new((0..files.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(files.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(file) = files.get(i) else { break };
                let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let summary = match simulate(file, &out.join(&stem), None) {
                    Ok(m) => RunSummary {
                        scenario: stem,
                        status: "ok",
                        exit_code: 0,
                        goal_reached: Some(m.goal_reached),
                        message: None,
                    },
                    Err(f) => RunSummary {
                        scenario: stem,
                        status: "failed",
                        exit_code: f.code,
                        goal_reached: None,
                        message: Some(format!("{:#}", f.error)),
                    },
                };
                results.lock().expect("no worker panics while holding the lock")[i] = Some(summary);
            });
        }
    });
    let results: Vec<RunSummary> =
        results.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every file was claimed")).collect();
    for r in &results {
        match &r.message {
            Some(m) => eprintln!("{}: {} ({m})", r.scenario, r.status),
            None => eprintln!("{}: {}", r.scenario, r.status),
        }
    }
    fs::create_dir_all(out).context("creating output directory").map_err(runtime)?;
    let summary = serde_json::to_string_pretty(&results).expect("plain data") + "\n";
    fs::write(out.join("summary.json"), summary).context("writing summary.json").map_err(runtime)?;
    Ok(results.iter().map(|r| r.exit_code).find(|c| *c != 0).unwrap_or(0))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // malformed arguments are input errors like an invalid scenario
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, out, seed } => simulate(&scenario, &out, seed).map(|_| 0),
        Command::Plan { map, meta, start, goal, inflation } => plan(&map, &meta, start, goal, inflation).map(|_| 0),
        Command::Batch { scenarios, out, jobs } => batch(&scenarios, &out, jobs),
        Command::Render { run } => harness::render_run_dir(&run)
            .map(|p| {
                println!("{}", p.display());
                0
            })
            .map_err(harness_failure),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

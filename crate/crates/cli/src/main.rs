//! `photoplan` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use photoplan::coverage::{tune_hyperparameters, CoverageField};
use photoplan::mission::{run_mission, run_until, write_outputs, TimingStats};
use photoplan::oracle::heatmap_oracle;
use photoplan::scenario::{bundled_names, default_tuning_grid, Scenario};
use photoplan::validate::{run_suite, SUITES};

#[derive(Parser, Debug)]
#[command(
    name = "photoplan",
    version,
    about = "Viewpoint planning for autonomous robot photography"
)]
struct Cli {
    /// Worker threads for candidate scoring (default: all cores).
    #[arg(long, global = true, env = "PHOTOPLAN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ScenarioArg {
    /// Scenario file, or the name of a bundled scenario.
    scenario: String,

    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a photography mission and write its logs.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,

        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the dense ground-truth score field for the start of a mission.
    Heatmap {
        #[command(flatten)]
        scenario: ScenarioArg,

        /// Grid step in meters.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        step: f64,

        /// Output CSV file.
        #[arg(long, default_value = "heatmap.csv")]
        out: PathBuf,

        /// Score against the fully revealed obstacle map instead of the
        /// initially known one.
        #[arg(long)]
        revealed: bool,

        /// Start from a fully captured target.
        #[arg(long)]
        captured: bool,
    },
    /// Run a self-check suite.
    Validate {
        /// One of: raycast, gp, pso-error, utility, all.
        suite: String,

        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit GP hyperparameters to the samples of a mission's first photo.
    TuneGp {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
    /// List bundled scenarios.
    Scenarios,
}

fn load(arg: &ScenarioArg) -> Result<Scenario> {
    let path = Path::new(&arg.scenario);
    let mut s = if path.exists() {
        Scenario::from_file(path)?
    } else if bundled_names().contains(&arg.scenario.as_str()) {
        Scenario::bundled(&arg.scenario)?
    } else {
        bail!(
            "no scenario file {:?} and no bundled scenario of that name (bundled: {})",
            arg.scenario,
            bundled_names().join(", ")
        );
    };
    if let Some(seed) = arg.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn cmd_run(arg: &ScenarioArg, out: &Path) -> Result<ExitCode> {
    let scenario = load(arg)?;
    let log = run_mission(&scenario)?;
    write_outputs(out, &log, &scenario)
        .with_context(|| format!("writing outputs to {}", out.display()))?;
    let timing = log.timing.unwrap_or_else(|| TimingStats::from_samples(&[]));
    println!("scenario: {}", scenario.name);
    println!("seed: {}", scenario.seed);
    println!("termination: {}", log.termination);
    println!("ticks: {}", log.ticks.len());
    println!("photos: {}", log.photos.len());
    println!("final coverage: {:.4}", log.final_mean());
    println!(
        "candidate evaluations: {} (mean {:.3} ms, median {:.3} ms)",
        timing.count,
        timing.mean * 1e3,
        timing.median * 1e3
    );
    println!("outputs: {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_heatmap(
    arg: &ScenarioArg,
    step: f64,
    out: &Path,
    revealed: bool,
    captured: bool,
) -> Result<ExitCode> {
    if step.is_nan() || step <= 0.0 {
        bail!("--step must be positive, got {step}");
    }
    let scenario = load(arg)?;
    let grid = if revealed {
        scenario.revealed_grid()
    } else {
        scenario.initial_grid()
    };
    let field = if captured {
        CoverageField::with_prior(vec![1.0; scenario.target.len()])
    } else {
        CoverageField::new(scenario.target.len())
    };
    let heat = heatmap_oracle(&scenario, &grid, &field, step)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, heat.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "candidates: {} ({} feasible)",
        heat.candidates,
        heat.cells.len()
    );
    match heat.argmax() {
        Some(best) => println!(
            "argmax: ({}, {}, {}) G={}",
            best.position[0], best.position[1], best.position[2], best.score
        ),
        None => println!("argmax: none (no feasible position)"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(suite: &str, seed: u64) -> Result<ExitCode> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut ok = true;
    for name in names {
        for check in run_suite(name, seed)? {
            println!("{}", check.line());
            ok &= check.passed;
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_tune_gp(arg: &ScenarioArg) -> Result<ExitCode> {
    let mut scenario = load(arg)?;
    scenario.mission.max_photos = 1;
    let grid = scenario
        .gp_tuning
        .clone()
        .unwrap_or_else(|| default_tuning_grid(scenario.target.spacing()));
    scenario.gp_tuning = None;
    let state = run_until(&scenario, |s| !s.photos.is_empty())?;
    let (xs, ys) = state.field.samples();
    if xs.len() < 2 {
        bail!("the mission produced fewer than two samples to fit");
    }
    let stride = (xs.len() / 300).max(1);
    let xs: Vec<_> = xs.iter().step_by(stride).copied().collect();
    let ys: Vec<_> = ys.iter().step_by(stride).copied().collect();
    let gp = tune_hyperparameters(&xs, &ys, &grid, &scenario.gp)?;
    println!("samples: {}", xs.len());
    println!("sigma_f: {}", gp.sigma_f);
    println!("sigma_l: {}", gp.sigma_l);
    println!("sigma_n: {}", gp.sigma_n);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PHOTOPLAN_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    info!("{:?}", cli.command);
    let result = match &cli.command {
        Command::Run { scenario, out } => cmd_run(scenario, out),
        Command::Heatmap {
            scenario,
            step,
            out,
            revealed,
            captured,
        } => cmd_heatmap(scenario, *step, out, *revealed, *captured),
        Command::Validate { suite, seed } => cmd_validate(suite, *seed),
        Command::TuneGp { scenario } => cmd_tune_gp(scenario),
        Command::Scenarios => {
            for n in bundled_names() {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

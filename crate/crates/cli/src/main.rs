//! `rlgl`: run one game, certify it and write the artifacts.
//!
//! Exit codes: 0 when the run certifies, 2 when certification finds a
//! barrier violation, 1 on any configuration or runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Parser};
use rlgl_core::{certify, emit, generate_paper_scenario, run, EmitOptions, ScenarioConfig};

/// Frame stride used when neither `--frames` nor `--no-frames` is given.
const DEFAULT_FRAME_EVERY: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "rlgl",
    version,
    about = "Safe multi-robot red light, green light simulator"
)]
#[command(allow_negative_numbers = true)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "paper_scenario"])))]
struct Args {
    /// Scenario file (key = value with [robot i] sections).
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Use the built-in 22-robot scenario.
    #[arg(long)]
    paper_scenario: bool,

    /// RNG seed; overrides the seed in a scenario file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Sampling period in seconds.
    #[arg(long, value_name = "S")]
    dt: Option<f64>,

    /// Game length in seconds.
    #[arg(long, value_name = "S")]
    duration: Option<f64>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Write one SVG frame every N steps.
    #[arg(long, value_name = "N", conflicts_with = "no_frames", value_parser = clap::value_parser!(u64).range(1..))]
    frames: Option<u64>,

    /// Do not write frames.
    #[arg(long)]
    no_frames: bool,
}

fn load(args: &Args) -> Result<ScenarioConfig> {
    let mut config = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))?;
            rlgl_core::parse_scenario_str(&text, args.seed)
                .with_context(|| format!("parsing scenario {}", path.display()))?
        }
        None => generate_paper_scenario(args.seed.unwrap_or(42)),
    };
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(duration) = args.duration {
        config.schedule.duration = duration;
    }
    Ok(config)
}

fn execute(args: &Args) -> Result<bool> {
    let config = load(args)?;
    let log = run(&config).context("running the game")?;
    let report = certify(&log, config.cert_tol);
    let frame_every = if args.no_frames {
        None
    } else {
        Some(args.frames.map_or(DEFAULT_FRAME_EVERY, |n| n as usize))
    };
    let options = EmitOptions {
        out_dir: args.out.clone(),
        frame_every,
    };
    let bundle = emit(&log, &report, &options).context("writing outputs")?;

    println!(
        "{} robots, {} steps: {} finished, {} eliminated, {} slack events",
        config.robots.len(),
        log.records.len().saturating_sub(1),
        report.finishes,
        report.eliminations,
        report.slack_event_count,
    );
    println!(
        "certified: {} ({} failures at tol {:e})",
        report.certified(),
        report.failures.len(),
        report.cert_tol
    );
    println!("report: {}", bundle.report.display());
    Ok(report.certified())
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for failed
    // certification here
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

//! `lipdelay` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Overrides, RewardName, RunConfig};
use crate::export::{export_run, read_csv, write_json, write_svg, Series, Summary, MAX_CURVE_POINTS};
use crate::grid::{reproduce_grid, run_config};
use crate::suite::{run_suite, SuiteOptions};
use crate::SimError;

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for runtime failures, including failed invariants.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lipdelay", version, about = "Lipschitz bandit simulator with delayed feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run the full grid: 3 rewards x 5 delay settings x 2 algorithms.
    Reproduce {
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run the invariant suite; exits 0 iff every check passes.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// Horizon of the instrumented zooming runs.
        #[arg(long)]
        horizon: Option<u64>,
        /// Trials per phased-pruning grid configuration.
        #[arg(long)]
        trials: Option<u32>,
        /// Trials of the concentration Monte Carlo.
        #[arg(long)]
        mc_trials: Option<u32>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Snapshot spacing in rounds.
        #[arg(long)]
        every: Option<u64>,
        /// Check every round.
        #[arg(long, conflicts_with = "every")]
        full: bool,
    },
    /// Redraw an SVG from existing CSV curves.
    Plot {
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "cumulative regret")]
        title: String,
        /// CSV files, optionally as `LABEL=PATH`.
        #[arg(required = true)]
        inputs: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { seed: a.seed, trials: a.trials, horizon: a.horizon, sigma: a.sigma, delta: a.delta, out: a.out }
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

fn error_line(kind: &str, message: impl Into<String>) -> String {
    serde_json::to_string(&ErrorLine { error: kind, message: message.into() }).expect("plain strings serialize")
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to `err` as one JSON line.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let message = e.kind().as_str().map_or_else(|| e.to_string(), str::to_string);
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let _ = writeln!(err, "{}", error_line("usage", format!("{message}: {first}")));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", error_line(e.kind(), e.to_string()));
            match e {
                SimError::Config(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, SimError> {
    match command {
        Command::Run { config, overrides } => {
            let mut run = RunConfig::load(&config)?;
            run.apply(&overrides.into());
            run.experiment()?;
            let result = run_config(&run)?;
            let paths = export_run(&result, &run.output.dir)?;
            let _ = writeln!(
                out,
                "{} final_mean={} final_std={} csv={}",
                run.label(),
                result.aggregate.final_mean,
                result.aggregate.final_std,
                paths.csv.display()
            );
            Ok(0)
        }
        Command::Reproduce { overrides } => {
            let mut overrides: Overrides = overrides.into();
            let dir = overrides.out.get_or_insert_with(|| PathBuf::from("out/reproduce")).clone();
            reproduce(&overrides, &dir, out)?;
            Ok(0)
        }
        Command::Verify { seed, horizon, trials, mc_trials, sigma, delta, every, full } => {
            let d = SuiteOptions::default();
            let o = SuiteOptions {
                master_seed: seed.unwrap_or(d.master_seed),
                zooming_horizon: horizon.unwrap_or(d.zooming_horizon),
                dlpp_trials: trials.unwrap_or(d.dlpp_trials),
                monte_carlo_trials: mc_trials.unwrap_or(d.monte_carlo_trials),
                sigma: sigma.unwrap_or(d.sigma),
                delta: delta.unwrap_or(d.delta),
                every: if full { 1 } else { every.unwrap_or(d.every) },
                ..d
            };
            validate_suite(&o)?;
            let checks = run_suite(&o)?;
            for c in &checks {
                let _ = writeln!(out, "{c}");
            }
            Ok(if checks.iter().all(|c| c.passed()) { 0 } else { EXIT_FAILURE })
        }
        Command::Plot { out: path, title, inputs } => {
            let mut series = Vec::with_capacity(inputs.len());
            for input in &inputs {
                let (label, file) = match input.split_once('=') {
                    Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                    None => {
                        let p = PathBuf::from(input);
                        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        (stem, p)
                    }
                };
                series.push(Series { label, points: read_csv(&file)? });
            }
            write_svg(&path, &title, &series)?;
            let _ = writeln!(out, "wrote {}", path.display());
            Ok(0)
        }
    }
}

fn validate_suite(o: &SuiteOptions) -> Result<(), SimError> {
    if o.zooming_horizon == 0 || o.dlpp_trials == 0 || o.monte_carlo_trials == 0 || o.every == 0 {
        return Err(SimError::Config("horizon, trials, mc-trials and every must be positive".into()));
    }
    if !(o.delta > 0.0 && o.delta < 1.0) {
        return Err(SimError::Config(format!("delta must lie in (0, 1), got {}", o.delta)));
    }
    if !(o.sigma >= 0.0 && o.sigma.is_finite()) {
        return Err(SimError::Config(format!("sigma must be finite and >= 0, got {}", o.sigma)));
    }
    Ok(())
}

#[derive(Serialize)]
struct GridSummary {
    runs: Vec<Summary>,
}

/// Runs the grid, writing one CSV/SVG/JSON triple per run, one overlay SVG
/// per reward and delay family, and `summary.json`.
pub fn reproduce(overrides: &Overrides, dir: &Path, out: &mut dyn Write) -> Result<Vec<Summary>, SimError> {
    let grid = reproduce_grid(overrides);
    for c in &grid {
        c.experiment()?;
    }
    let mut summaries = Vec::with_capacity(grid.len());
    let mut curves = Vec::with_capacity(grid.len());
    for c in &grid {
        let result = run_config(c)?;
        export_run(&result, dir)?;
        let _ = writeln!(
            out,
            "{:<10} {:<32} final_mean={:.2} final_std={:.2} ({:.1}s)",
            c.reward.as_str(),
            c.label(),
            result.aggregate.final_mean,
            result.aggregate.final_std,
            result.wall_time.as_secs_f64()
        );
        curves.push((c.clone(), result.aggregate.subsample(MAX_CURVE_POINTS)));
        summaries.push(Summary::of(&result));
    }
    for reward in RewardName::ALL {
        for family in ["uniform", "geometric"] {
            let series: Vec<Series> = curves
                .iter()
                .filter(|(c, _)| c.reward == reward && matches!(c.delay.family(), f if f == family || f == "zero"))
                .map(|(c, points)| Series { label: c.label(), points: points.clone() })
                .collect();
            let title = format!("{} with {family} delays", reward.as_str());
            write_svg(&dir.join(format!("{}_{family}.svg", reward.as_str())), &title, &series)?;
        }
    }
    write_json(&dir.join("summary.json"), &GridSummary { runs: summaries.clone() })?;
    Ok(summaries)
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (bad arguments, malformed or
//! invalid scenario), 2 runtime failure (I/O, simulation error).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::engine::{run_comparison, run_scenario, SimError};
use crate::report::{to_json, trace_csv, write_atomic};
use crate::scenario::{generate_scenario, parse_scenario, GeneratorParams, ScenarioConfig, ScenarioError};
use crate::sweep::{run_sweep, seeded, with_jobs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "relaymesh", version, about = "Slot-based mobile mesh relay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the relay protocol on a scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the per-event CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the JSON summary here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random scenario file.
    Generate {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        sessions: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        range: Option<f64>,
        /// World size as WIDTHxHEIGHT in meters.
        #[arg(long, value_parser = parse_area)]
        area: Option<(f64, f64)>,
        /// Speed envelope as MIN:MAX in meters per slot.
        #[arg(long, value_parser = parse_speed)]
        speed: Option<(f64, f64)>,
        #[arg(long, default_value_t = 200)]
        max_slots: u64,
        #[arg(long, default_value_t = 1)]
        start_window: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the protocol and the flooding baseline side by side.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one scenario under many seeds, one report file per seed.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Number of seeds.
        #[arg(long)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_pair(s: &str, sep: char, what: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(sep)
        .ok_or_else(|| format!("expected {what} as A{sep}B, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_area(s: &str) -> Result<(f64, f64), String> {
    parse_pair(s, 'x', "area")
}

fn parse_speed(s: &str) -> Result<(f64, f64), String> {
    parse_pair(s, ':', "speed")
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Sim(SimError::Scenario(_)) => EXIT_INVALID,
            CliError::Sim(SimError::Protocol(_)) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_scenario(&text)?)
}

fn save(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, trace, out } => {
            let config = load(&scenario)?;
            let report = run_scenario(&config)?;
            if let Some(path) = trace {
                save(&path, &trace_csv(&report.trace))?;
            }
            let json = to_json(&report);
            match out {
                Some(path) => save(&path, &json)?,
                None => io::stdout().write_all(&json).map_err(io_err(Path::new("<stdout>")))?,
            }
        }
        Command::Generate {
            nodes,
            sessions,
            seed,
            range,
            area,
            speed,
            max_slots,
            start_window,
            out,
        } => {
            let d = GeneratorParams::default();
            let (width, height) = area.unwrap_or((d.width, d.height));
            let (speed_min, speed_max) = speed.unwrap_or((d.speed_min, d.speed_max));
            let params = GeneratorParams {
                node_count: nodes,
                width,
                height,
                range: range.unwrap_or(d.range),
                speed_min,
                speed_max,
                session_count: sessions,
                start_window,
                max_slots,
                seed,
            };
            let config = generate_scenario(&params)?;
            save(&out, to_json(&config).as_slice())?;
        }
        Command::Compare { scenario, out } => {
            let config = load(&scenario)?;
            let cmp = run_comparison(&config)?;
            save(&out, &to_json(&cmp))?;
        }
        Command::Validate { scenario } => {
            let config = load(&scenario)?;
            eprintln!(
                "{}: ok ({} nodes, {} sessions, {} slots)",
                scenario.display(),
                config.node_count(),
                config.session_count(),
                config.max_slots
            );
        }
        Command::Sweep {
            scenario,
            seeds,
            first_seed,
            jobs,
            out_dir,
        } => {
            let base = load(&scenario)?;
            let seed_list: Vec<u64> = (first_seed..first_seed.saturating_add(seeds)).collect();
            let configs = seeded(&base, &seed_list);
            let reports = with_jobs(jobs, || run_sweep(&configs));
            for (seed, report) in seed_list.iter().zip(reports) {
                let report = report?;
                save(&out_dir.join(format!("seed-{seed}.json")), &to_json(&report))?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

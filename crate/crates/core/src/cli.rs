// SPDX-License-Identifier: Apache-2.0

//! `fbra` command line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::metrics::{self, Aggregate, RunSummary};
use crate::netsim::{self, Scenario};
use crate::types::SimTime;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fbra", version, about = "FEC-based rate adaptation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its trace and metrics.
    Run(RunArgs),
    /// Run seeds 1..=N and aggregate their metrics.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (key = value lines).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scenario duration, seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub fec_interval_min: Option<u8>,
    #[arg(long)]
    pub fec_interval_max: Option<u8>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of seeds.
    #[arg(long, default_value_t = 30)]
    pub seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Loads the scenario file and applies command line overrides.
pub fn load_scenario(args: &CommonArgs) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(&args.scenario)?;
    if let Some(d) = args.duration {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(CliError::Config("--duration must be non-negative".into()));
        }
        s.duration = SimTime((d * 1e6).round() as u64);
    }
    if let Some(v) = args.fec_interval_min {
        s.controller.fec_interval_min = v;
    }
    if let Some(v) = args.fec_interval_max {
        s.controller.fec_interval_max = v;
    }
    s.validate()?;
    Ok(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Table of media flow metrics in the units used for reporting.
pub fn write_summary_table<W: Write>(s: &RunSummary, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# {}", metrics::SUMMARY_SCHEMA)?;
    writeln!(
        w,
        "flow_id,goodput_kbps,loss_rate_pct,lost_frames,fec_rate_kbps,frcc,ffre,abu"
    )?;
    for f in &s.rtp {
        writeln!(
            w,
            "{},{:.1},{:.3},{},{:.1},{},{},{:.4}",
            f.flow_id,
            f.goodput_bps / 1000.0,
            f.loss_rate * 100.0,
            f.lost_frames,
            f.fec_rate_bps / 1000.0,
            fmt_opt(f.frcc),
            fmt_opt(f.ffre),
            f.abu
        )?;
    }
    Ok(())
}

/// Runs one simulation and writes trace.csv, summary.json, summary.csv and
/// timeseries.csv into `out`.
pub fn run_to_dir(scenario: &Scenario, out: &Path) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let trace = netsim::run(scenario)?;
    let summary = metrics::summarize(&trace);
    write_with(&out.join("trace.csv"), |w| trace.write_csv(w))?;
    write_json(&out.join("summary.json"), &summary)?;
    write_with(&out.join("summary.csv"), |w| write_summary_table(&summary, w))?;
    let rows = metrics::timeseries(&trace);
    write_with(&out.join("timeseries.csv"), |w| {
        metrics::write_timeseries_csv(&rows, w)
    })?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    #[serde(flatten)]
    aggregate: &'a Aggregate,
    failed_seeds: Vec<u64>,
}

/// Runs seeds `1..=n` through `runner`, each into `out/seed-<k>`, and
/// writes `aggregate.json` over the runs that succeeded. Any failure is
/// reported after all seeds have finished.
pub fn sweep_with<F>(scenario: &Scenario, n: u64, out: &Path, runner: F) -> Result<Aggregate, CliError>
where
    F: Fn(&Scenario, &Path) -> Result<RunSummary, CliError> + Sync,
{
    if n == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let results: Vec<(u64, Result<RunSummary, CliError>)> = (1..=n)
        .into_par_iter()
        .map(|seed| {
            let s = scenario.clone().with_seed(seed);
            let r = runner(&s, &out.join(format!("seed-{seed}")));
            (seed, r)
        })
        .collect();

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut first_err = None;
    for (seed, r) in results {
        match r {
            Ok(s) => ok.push((seed, s)),
            Err(e) => {
                error!("seed {seed} failed: {e}");
                failed.push(seed);
                first_err.get_or_insert(e);
            }
        }
    }
    let agg = metrics::aggregate(&ok);
    write_json(
        &out.join("aggregate.json"),
        &SweepReport {
            aggregate: &agg,
            failed_seeds: failed.clone(),
        },
    )?;
    match first_err {
        None => Ok(agg),
        Some(e) => Err(CliError::Runtime(format!(
            "{} of {n} seeds failed ({:?}); first error: {e}",
            failed.len(),
            failed
        ))),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut s = load_scenario(&args.common)?;
            if let Some(seed) = args.seed {
                s.seed = seed;
            }
            let summary = run_to_dir(&s, &args.common.out)?;
            info!("wrote results to {}", args.common.out.display());
            for f in &summary.rtp {
                println!(
                    "{}: goodput {:.1} kbps, loss {:.2}%, frcc {}",
                    f.flow_id,
                    f.goodput_bps / 1000.0,
                    f.loss_rate * 100.0,
                    fmt_opt(f.frcc)
                );
            }
            Ok(())
        }
        Command::Sweep(args) => {
            let s = load_scenario(&args.common)?;
            let agg = sweep_with(&s, args.seeds, &args.common.out, run_to_dir)?;
            for (k, st) in &agg.metrics {
                println!("{k}: mean {:.4} sd {:.4} (n={})", st.mean, st.std, st.n);
            }
            Ok(())
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("FBRA_LOG_LEVEL", "warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fbra: {e}");
            e.exit_code()
        }
    }
}

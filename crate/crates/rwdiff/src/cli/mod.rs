//! Command-line front end.

pub mod plot;
pub mod svg;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::expansion::growth::{classify_growth, default_probe_grid};
use crate::expansion::horizon::{default_split_point, horizon_integrals};
use crate::expansion::modelfile::read_model_file;
use crate::expansion::{catalog, predict_regimes, ExpansionModel};
use crate::harness::ensemble::{initial_state, EnsembleError, RunOptions};
use crate::harness::{run_ensemble_with, verify_regime, EnsembleConfig, InitMode};
use crate::kv::parse_list;
use crate::rng::trajectory_rng;
use crate::spatial::export::write_trajectory_csv;
use crate::spatial::{simulate_full, Fiber, SpatialState};
use crate::temporal::export::{sidecar_path, write_sidecar, Sidecar};
use crate::temporal::StepParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rwdiff", version, about = "Relativistic diffusions on Robertson-Walker spacetimes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List catalog models with their growth class and horizon integrals.
    Catalog,
    /// Print the predicted asymptotic regimes as JSON.
    Classify(ClassifyArgs),
    /// Simulate one trajectory to CSV with a JSON sidecar.
    Simulate(SimulateArgs),
    /// Run an ensemble from a config file and write its statistics.
    Ensemble(EnsembleArgs),
    /// Classify, run the ensemble and check every predicted claim.
    Verify(EnsembleArgs),
    /// Turn a trajectory CSV into plottable series (CSV and SVG).
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Catalog family name.
    #[arg(long, conflicts_with = "model_file", required_unless_present = "model_file")]
    pub model: Option<String>,
    /// Comma-separated family parameters (fractions such as 2/3 allowed).
    #[arg(long, requires = "model", allow_hyphen_values = true)]
    pub params: Option<String>,
    /// Key-value model file.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<ExpansionModel> {
        match (&self.model, &self.model_file) {
            (_, Some(path)) => Ok(read_model_file(path)?),
            (Some(name), None) => {
                let params = match &self.params {
                    Some(p) => parse_list("params", p)?,
                    None => Vec::new(),
                };
                Ok(catalog(name, &params)?)
            }
            (None, None) => bail!("either --model or --model-file is required"),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "r3")]
    pub fiber: Fiber,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Fiber dimension; must agree with --fiber.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "r3")]
    pub fiber: Fiber,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub ds: f64,
    #[arg(long, default_value_t = 10.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// Initial time t₀.
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    /// Initial ṫ₀ ≥ 1.
    #[arg(long, default_value_t = 2.0)]
    pub tdot0: f64,
    /// Output CSV; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// JSON output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one CSV per trajectory into this directory.
    #[arg(long)]
    pub raw_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving the series files.
    #[arg(long)]
    pub out: PathBuf,
    /// Fiber of the trajectory; read from the sidecar when absent.
    #[arg(long)]
    pub fiber: Option<Fiber>,
}

fn check_d(fiber: &Fiber, d: Option<usize>) -> Result<()> {
    match d {
        Some(d) if d != fiber.d => bail!("--d {d} disagrees with --fiber {fiber}"),
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Models listed by `catalog`.
pub const CATALOG: &[(&str, &[f64])] = &[
    ("constant", &[]),
    ("exponential", &[1.0]),
    ("power", &[2.0 / 3.0]),
    ("power", &[1.0]),
    ("power_exp", &[0.0, 0.5]),
    ("power_exp", &[0.0, 0.8]),
    ("sinh", &[]),
    ("poly", &[0.0, 1.0, 1.0]),
    ("big_crunch_radiation", &[]),
];

fn cmd_catalog() -> Result<i32> {
    let mut rows = Vec::new();
    for (name, params) in CATALOG {
        let m = catalog(name, params)?;
        let growth = classify_growth(&m, &default_probe_grid()).map_err(|e| anyhow!(e.to_string()));
        let horizons = horizon_integrals(&m, default_split_point(&m), 1e-6).map_err(|e| anyhow!(e.to_string()));
        rows.push(serde_json::json!({
            "model": m.spec(),
            "name": m.name(),
            "growth": growth.as_ref().ok(),
            "horizons": horizons.as_ref().ok(),
            "error": growth.err().or(horizons.err()).map(|e| e.to_string()),
        }));
    }
    emit(None, &to_json(&rows))?;
    Ok(EXIT_OK)
}

fn cmd_classify(a: &ClassifyArgs) -> Result<i32> {
    check_d(&a.fiber, a.d)?;
    let m = a.model.build()?;
    let pred = predict_regimes(&m, a.fiber.kappa(), a.fiber.d, a.sigma)?;
    emit(None, &to_json(&pred))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    check_d(&a.fiber, a.d)?;
    let m = a.model.build()?;
    let mut config = EnsembleConfig::new(m, a.fiber, a.sigma);
    config.n_traj = 1;
    config.ds = a.ds;
    config.s_max = a.s_max;
    config.thin = a.thin;
    config.seed = a.seed;
    config.init = InitMode::Tdot { t: a.t0, tdot: a.tdot0 };
    config.validate()?;
    let init = initial_state(&config)?;
    let traj = simulate_full(
        init,
        SpatialState::origin(&a.fiber),
        &config.model,
        &a.fiber,
        &StepParams::new(a.sigma, a.fiber.d, a.ds),
        a.s_max,
        a.thin,
        &mut trajectory_rng(a.seed, 0),
    );
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_trajectory_csv(&traj, BufWriter::new(file))?;
    let sidecar = Sidecar {
        termination: traj.temporal.terminated.clone(),
        model: config.model.spec(),
        fiber: Some(a.fiber.label()),
        sigma: a.sigma,
        d: a.fiber.d,
        ds: a.ds,
        s_max: a.s_max,
        seed: a.seed,
        thin: a.thin,
        samples: traj.temporal.samples.len(),
    };
    write_sidecar(&sidecar_path(&a.out), &sidecar)?;
    if traj.temporal.terminated.is_failure() {
        eprintln!("trajectory failed: {:?}", traj.temporal.terminated);
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn load_config(a: &EnsembleArgs) -> Result<EnsembleConfig> {
    let mut c = EnsembleConfig::read(&a.config)?;
    if let Some(v) = a.n_traj {
        c.n_traj = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.s_max {
        c.s_max = v;
    }
    if let Some(v) = a.ds {
        c.ds = v;
    }
    if let Some(v) = a.thin {
        c.thin = v;
    }
    c.validate()?;
    Ok(c)
}

fn run_options(a: &EnsembleArgs) -> RunOptions {
    RunOptions {
        workers: None,
        raw_csv_dir: a.raw_csv.clone(),
    }
}

fn cmd_ensemble(a: &EnsembleArgs) -> Result<i32> {
    let c = load_config(a)?;
    match run_ensemble_with(&c, &run_options(a)) {
        Ok(stats) => {
            emit(a.out.as_deref(), &stats.to_json())?;
            Ok(EXIT_OK)
        }
        Err(EnsembleError::TooManyFailures { failed, n, stats }) => {
            emit(a.out.as_deref(), &stats.to_json())?;
            eprintln!("{failed} of {n} trajectories failed numerically");
            Ok(EXIT_NUMERICAL)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_verify(a: &EnsembleArgs) -> Result<i32> {
    let c = load_config(a)?;
    let pred = predict_regimes(&c.model, c.fiber.kappa(), c.d, c.sigma)?;
    let mut stats = match run_ensemble_with(&c, &run_options(a)) {
        Ok(s) => s,
        Err(EnsembleError::TooManyFailures { failed, n, stats }) => {
            emit(a.out.as_deref(), &stats.to_json())?;
            eprintln!("{failed} of {n} trajectories failed numerically");
            return Ok(EXIT_NUMERICAL);
        }
        Err(e) => return Err(e.into()),
    };
    let report = verify_regime(&stats, &pred, &c.tolerances)?;
    for claim in &report.claims {
        eprintln!("{:<20} {:?}", claim.claim, claim.outcome);
    }
    if report.unconverged > 0 {
        eprintln!("{} claim(s) unconverged within the budget", report.unconverged);
    }
    let code = if report.no_failures() { EXIT_OK } else { EXIT_VERIFY };
    stats.regime_verdict = Some(report);
    emit(a.out.as_deref(), &stats.to_json())?;
    Ok(code)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Catalog => cmd_catalog(),
        Command::Classify(a) => cmd_classify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Ensemble(a) => cmd_ensemble(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::PlotData(a) => plot::cmd_plot_data(&a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

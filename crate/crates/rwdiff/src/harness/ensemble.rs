use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::growth::{classify_growth, default_probe_grid};
use crate::expansion::hypotheses::{check_hypotheses, default_check_grid};
use crate::expansion::GrowthClass;
use crate::rng::trajectory_rng;
use crate::spatial::boundary::{
    boundary_limit_with, direction_spread, great_circle_residual, scalar_spread, tail_start, BoundaryPoint,
    BoundaryReport,
};
use crate::spatial::fiber::{dot, norm};
use crate::spatial::polar::polar_diagnostics;
use crate::spatial::{export as spatial_export, simulate_full, FiberKind, SpatialState, Trajectory};
use crate::temporal::diagnostics::clock_diagnostic_with;
use crate::temporal::export::{sidecar_path, write_sidecar, ExportError, Sidecar};
use crate::temporal::path::{entrance_start, EntranceError};
use crate::temporal::{
    rate_estimate, ClockVerdict, InvariantMeasure, Rates, StepParams, TemporalPath, TemporalSample, TemporalState, Termination,
};

use super::config::{ConfigSummary, EnsembleConfig, InitMode, Statistic};
use super::stats::{ks_distance, mean_se, occupation_measure, return_counts, Weighted};
use super::verify::VerdictReport;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "RWDIFF_WORKERS";

/// Largest tolerated fraction of failed trajectories.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model fails the admissibility hypotheses")]
    NotAdmissible,
    #[error("cannot build the entrance start: {0}")]
    Entrance(#[from] EntranceError),
    #[error("cannot build the worker pool: {0}")]
    Pool(String),
    #[error("cannot write raw trajectory output: {0}")]
    Export(#[from] ExportError),
    #[error("{failed} of {n} trajectories failed numerically")]
    TooManyFailures {
        failed: usize,
        n: usize,
        stats: Box<EnsembleStats>,
    },
}

/// Worker count from `RWDIFF_WORKERS`, defaulting to the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides [`worker_count`].
    pub workers: Option<usize>,
    /// Directory receiving `traj_<index>.csv` and its sidecar per trajectory.
    pub raw_csv_dir: Option<PathBuf>,
}

/// Point estimate with its standard error across trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Theory value, when one is available.
    pub reference: Option<f64>,
    pub values: Vec<f64>,
}

impl Estimate {
    pub fn from_values(values: Vec<f64>, reference: Option<f64>) -> Self {
        let (estimate, std_error) = mean_se(&values);
        Estimate {
            estimate,
            std_error,
            reference,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub distance: f64,
    /// H of the reference invariant law ν_{H,σ}.
    pub h: f64,
    pub burn_in: f64,
    pub pooled_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSummary {
    pub converging: usize,
    pub diverging: usize,
    pub undetermined: usize,
    pub converging_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsSummary {
    pub level: f64,
    pub burn_in: f64,
    pub horizons: Vec<f64>,
    /// Ensemble totals of down-crossings up to each horizon.
    pub totals: Vec<usize>,
    pub per_trajectory: Vec<Vec<usize>>,
    /// Time-averaged log ṫ over the last quarter of proper time minus its
    /// average over the second quarter, per trajectory.
    pub log_tdot_growth: Estimate,
}

impl ReturnsSummary {
    /// Increase over the last horizon doubling relative to the final total.
    pub fn last_increase_ratio(&self) -> f64 {
        let n = self.totals.len();
        let last = self.totals[n - 1] as f64;
        if n < 2 || last == 0.0 {
            return 0.0;
        }
        (last - self.totals[n - 2] as f64) / last
    }

    /// Totals never decrease by construction; growing means strictly
    /// increasing at every horizon.
    pub fn strictly_increasing(&self) -> bool {
        self.totals.windows(2).all(|w| w[1] > w[0])
    }
}

/// Boundary outcome of one trajectory with the checks derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRecord {
    pub index: usize,
    pub report: BoundaryReport,
    pub direction_spread: f64,
    /// min c/a over the tail (hyperbolic fibers).
    pub c_over_a_tail_min: Option<f64>,
    /// max c/a over the tail (hyperbolic fibers).
    pub c_over_a_tail_max: Option<f64>,
    /// Range of a_s over the tail.
    pub a_tail_spread: f64,
    pub great_circle: Option<GreatCircleCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreatCircleCheck {
    pub norm_u: f64,
    pub norm_v: f64,
    pub dot_uv: f64,
    /// max |x_s − cos(A_s)U − sin(A_s)V| over the final 10% of samples.
    pub residual: f64,
}

impl GreatCircleCheck {
    pub fn frame_error(&self) -> f64 {
        (self.norm_u - 1.0).abs().max((self.norm_v - 1.0).abs()).max(self.dot_uv.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySummary {
    pub kinds: BTreeMap<String, usize>,
    pub converged_fraction: f64,
    pub records: Vec<BoundaryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub index: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub config: ConfigSummary,
    pub n_traj: usize,
    pub n_failed: usize,
    pub failures: Vec<FailureNote>,
    pub terminations: BTreeMap<String, usize>,
    pub max_pseudo_norm_residual: f64,
    pub max_constraint_residual: f64,
    pub statistics: BTreeMap<String, Estimate>,
    pub ks: Option<KsReport>,
    /// Pooled occupation quantiles `(level, value)` at levels k/100.
    pub occupation_quantiles: Option<Vec<(f64, f64)>>,
    pub clock: Option<ClockSummary>,
    pub returns: Option<ReturnsSummary>,
    pub boundary: Option<BoundarySummary>,
    pub regime_verdict: Option<VerdictReport>,
}

impl EnsembleStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize") + "\n"
    }

    pub fn statistic(&self, name: &str) -> Option<&Estimate> {
        self.statistics.get(name)
    }

    /// Fraction of trajectories (out of all) that ended at the horizon.
    pub fn horizon_fraction(&self) -> f64 {
        *self.terminations.get("horizon_reached").unwrap_or(&0) as f64 / self.n_traj as f64
    }
}

/// Everything extracted from one trajectory.
#[derive(Debug, Clone)]
struct Record {
    termination: Termination,
    max_pn: f64,
    max_c: f64,
    rates: Option<Rates>,
    clock: Option<ClockVerdict>,
    occupation: Option<Weighted>,
    inv_tdot_sq: Option<f64>,
    returns: Option<Vec<usize>>,
    log_tdot_growth: f64,
    boundary: Option<BoundaryRecord>,
}

fn termination_key(t: &Termination) -> &'static str {
    match t {
        Termination::HorizonReached { .. } => "horizon_reached",
        Termination::ProperTimeBudget => "proper_time_budget",
        Termination::NumericalFailure { .. } => "numerical_failure",
    }
}

pub fn step_params(config: &EnsembleConfig) -> StepParams {
    StepParams::new(config.sigma, config.d, config.ds)
}

/// Initial temporal state prescribed by the configuration.
pub fn initial_state(config: &EnsembleConfig) -> Result<TemporalState, EnsembleError> {
    let m = &config.model;
    Ok(match config.init {
        InitMode::Tdot { t, tdot } => TemporalState::from_tdot(m, 0.0, t, tdot),
        InitMode::A { t, a } => TemporalState::new(m, 0.0, t, a),
        InitMode::Entrance { a0 } => entrance_start(m, a0, &step_params(config))?,
    })
}

/// The trajectory with index `index` of the ensemble described by `config`.
pub fn ensemble_trajectory(config: &EnsembleConfig, init: TemporalState, index: u64) -> Trajectory {
    simulate_full(
        init,
        SpatialState::origin(&config.fiber),
        &config.model,
        &config.fiber,
        &step_params(config),
        config.s_max,
        config.thin,
        &mut trajectory_rng(config.seed, index),
    )
}

fn boundary_record(index: usize, traj: &Trajectory, config: &EnsembleConfig) -> Option<BoundaryRecord> {
    let opts = config.tolerances.boundary;
    let report = boundary_limit_with(traj, &config.model, opts).ok()?;
    let start = tail_start(traj.spatial.len(), opts.tail_fraction);
    let (mut lo, mut hi) = (None, None);
    if traj.fiber.kind == FiberKind::Hyperbolic {
        for sp in &traj.spatial[start..] {
            if let Ok(p) = polar_diagnostics(sp, &traj.fiber) {
                lo = Some(lo.map_or(p.c_over_a, |v: f64| v.min(p.c_over_a)));
                hi = Some(hi.map_or(p.c_over_a, |v: f64| v.max(p.c_over_a)));
            }
        }
    }
    let a_tail: Vec<f64> = traj.temporal.samples[start..].iter().map(|s| s.a()).collect();
    let great_circle = match &report.point {
        BoundaryPoint::GreatCircle { u, v } => Some(GreatCircleCheck {
            norm_u: norm(u),
            norm_v: norm(v),
            dot_uv: dot(u, v),
            residual: great_circle_residual(traj, u, v, 0.1),
        }),
        _ => None,
    };
    Some(BoundaryRecord {
        index,
        direction_spread: direction_spread(traj, &report.point, opts.tail_fraction),
        report,
        c_over_a_tail_min: lo,
        c_over_a_tail_max: hi,
        a_tail_spread: scalar_spread(&a_tail),
        great_circle,
    })
}

/// Proper-time average of log ṫ over the samples with s in [lo, hi].
pub fn window_mean_log_tdot(path: &TemporalPath, lo: f64, hi: f64) -> f64 {
    let inside: Vec<&TemporalSample> = path.samples.iter().filter(|x| x.s() >= lo && x.s() <= hi).collect();
    if inside.len() < 2 {
        let nearest = path
            .samples
            .iter()
            .min_by(|a, b| (a.s() - hi).abs().total_cmp(&(b.s() - hi).abs()))
            .expect("paths hold at least one sample");
        return nearest.tdot().ln();
    }
    let mut area = 0.0;
    for w in inside.windows(2) {
        area += 0.5 * (w[1].s() - w[0].s()) * (w[0].tdot().ln() + w[1].tdot().ln());
    }
    area / (inside[inside.len() - 1].s() - inside[0].s())
}

fn log_tdot_growth(path: &TemporalPath) -> f64 {
    let (s0, s1) = (path.samples[0].s(), path.last().s());
    let at = |f: f64| s0 + f * (s1 - s0);
    window_mean_log_tdot(path, at(0.75), at(1.0)) - window_mean_log_tdot(path, at(0.25), at(0.5))
}

fn record(index: usize, traj: &Trajectory, config: &EnsembleConfig) -> Record {
    let path = &traj.temporal;
    let tol = &config.tolerances;
    let failed = path.terminated.is_failure();
    let occupation = if config.wants(Statistic::Occupation) || config.wants(Statistic::TimeAverage) {
        occupation_measure(path, config.burn_in()).ok()
    } else {
        None
    };
    let n = path.samples.len();
    Record {
        termination: path.terminated.clone(),
        max_pn: traj.max_pseudo_norm_residual,
        max_c: traj.max_constraint_residual,
        rates: config
            .wants(Statistic::Rates)
            .then(|| rate_estimate(path, &config.model, tol.rate_tail).ok())
            .flatten(),
        clock: config
            .wants(Statistic::Clock)
            .then(|| {
                let window = ((tol.clock_window * n as f64) as usize).max(1);
                clock_diagnostic_with(path, window, tol.clock_tol).ok()
            })
            .flatten(),
        inv_tdot_sq: occupation
            .as_ref()
            .filter(|_| config.wants(Statistic::TimeAverage))
            .map(|w| w.mean_of(|x| 1.0 / (x * x))),
        occupation: occupation.filter(|_| config.wants(Statistic::Occupation)),
        returns: config
            .wants(Statistic::Returns)
            .then(|| {
                let h = [config.s_max / 4.0, config.s_max / 2.0, config.s_max];
                return_counts(path, tol.return_level, tol.return_burn_in, &h).ok()
            })
            .flatten(),
        log_tdot_growth: log_tdot_growth(path),
        boundary: (config.wants(Statistic::Boundary) && !failed)
            .then(|| boundary_record(index, traj, config))
            .flatten(),
    }
}

fn write_raw(dir: &Path, index: usize, traj: &Trajectory, config: &EnsembleConfig) -> Result<(), ExportError> {
    let csv = dir.join(format!("traj_{index:04}.csv"));
    let file = std::fs::File::create(&csv)?;
    spatial_export::write_trajectory_csv(traj, std::io::BufWriter::new(file))?;
    write_sidecar(
        &sidecar_path(&csv),
        &Sidecar {
            termination: traj.temporal.terminated.clone(),
            model: config.model.spec(),
            fiber: Some(config.fiber.label()),
            sigma: config.sigma,
            d: config.d,
            ds: config.ds,
            s_max: config.s_max,
            seed: config.seed,
            thin: config.thin,
            samples: traj.temporal.samples.len(),
        },
    )
}

/// Reference H for the invariant law when α grows exponentially.
fn invariant_h(config: &EnsembleConfig) -> Option<f64> {
    match classify_growth(&config.model, &default_probe_grid()) {
        Ok(GrowthClass::Exponential { h_inf }) if h_inf > 0.0 => Some(h_inf),
        _ => None,
    }
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleStats, EnsembleError> {
    run_ensemble_with(config, &RunOptions::default())
}

/// Simulates `n_traj` independent trajectories (stream `i` seeded from
/// `(seed, i)`) on a worker pool and folds the estimators in index order.
/// The result does not depend on the worker count.
pub fn run_ensemble_with(config: &EnsembleConfig, opts: &RunOptions) -> Result<EnsembleStats, EnsembleError> {
    config.validate().map_err(|e| EnsembleError::Config(e.to_string()))?;
    if !check_hypotheses(&config.model, &default_check_grid(&config.model)).all_passed {
        return Err(EnsembleError::NotAdmissible);
    }
    let init = initial_state(config)?;
    if let Some(dir) = &opts.raw_csv_dir {
        std::fs::create_dir_all(dir).map_err(ExportError::from)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or_else(worker_count))
        .build()
        .map_err(|e| EnsembleError::Pool(e.to_string()))?;
    let records: Vec<Record> = pool.install(|| {
        (0..config.n_traj)
            .into_par_iter()
            .map(|i| {
                let traj = ensemble_trajectory(config, init, i as u64);
                if let Some(dir) = &opts.raw_csv_dir {
                    write_raw(dir, i, &traj, config)?;
                }
                Ok(record(i, &traj, config))
            })
            .collect::<Result<Vec<_>, ExportError>>()
    })?;
    let stats = aggregate(config, records);
    if stats.n_failed as f64 > MAX_FAILURE_FRACTION * config.n_traj as f64 {
        return Err(EnsembleError::TooManyFailures {
            failed: stats.n_failed,
            n: config.n_traj,
            stats: Box::new(stats),
        });
    }
    Ok(stats)
}

fn aggregate(config: &EnsembleConfig, records: Vec<Record>) -> EnsembleStats {
    let mut terminations = BTreeMap::new();
    let mut failures = Vec::new();
    for (i, r) in records.iter().enumerate() {
        *terminations.entry(termination_key(&r.termination).to_string()).or_insert(0) += 1;
        if r.termination.is_failure() {
            failures.push(FailureNote {
                index: i,
                termination: r.termination.clone(),
            });
        }
    }
    let ok: Vec<&Record> = records.iter().filter(|r| !r.termination.is_failure()).collect();
    let h_inv = invariant_h(config);
    let measure = h_inv.and_then(|h| InvariantMeasure::new(h, config.sigma, config.d).ok());

    let mut statistics = BTreeMap::new();
    if config.wants(Statistic::Rates) {
        let rates: Vec<Rates> = ok.iter().filter_map(|r| r.rates).collect();
        for (name, f) in [
            ("rate_tdot", (|r: &Rates| r.rate_tdot) as fn(&Rates) -> f64),
            ("rate_alpha", |r| r.rate_alpha),
            ("rate_int_alpha", |r| r.rate_int_alpha),
        ] {
            statistics.insert(name.to_string(), Estimate::from_values(rates.iter().map(f).collect(), None));
        }
    }
    if config.wants(Statistic::TimeAverage) {
        let reference = measure.as_ref().and_then(|m| m.expectation(|x| 1.0 / (x * x)).ok());
        let values = ok.iter().filter_map(|r| r.inv_tdot_sq).collect();
        statistics.insert("time_average_inv_tdot_sq".into(), Estimate::from_values(values, reference));
    }
    let mut pooled = Weighted {
        values: Vec::new(),
        weights: Vec::new(),
    };
    for w in ok.iter().filter_map(|r| r.occupation.as_ref()) {
        pooled.extend(w);
    }
    let ks = match &measure {
        Some(m) if !pooled.values.is_empty() => Some(KsReport {
            distance: ks_distance(&pooled, |x| m.cdf(x)),
            h: m.h,
            burn_in: config.burn_in(),
            pooled_samples: pooled.values.len(),
        }),
        _ => None,
    };
    let occupation_quantiles = (!pooled.values.is_empty()).then(|| {
        let levels: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
        let q = pooled.quantiles(&levels);
        levels.into_iter().zip(q).collect()
    });
    let clock = config.wants(Statistic::Clock).then(|| {
        let converging = ok.iter().filter(|r| matches!(r.clock, Some(c) if c.is_converging())).count();
        let diverging = ok.iter().filter(|r| matches!(r.clock, Some(c) if !c.is_converging())).count();
        let undetermined = ok.len() - converging - diverging;
        ClockSummary {
            converging,
            diverging,
            undetermined,
            converging_fraction: converging as f64 / ok.len().max(1) as f64,
        }
    });
    let returns = config.wants(Statistic::Returns).then(|| {
        let per: Vec<Vec<usize>> = ok.iter().filter_map(|r| r.returns.clone()).collect();
        let horizons = vec![config.s_max / 4.0, config.s_max / 2.0, config.s_max];
        let totals = (0..horizons.len()).map(|k| per.iter().map(|c| c[k]).sum()).collect();
        ReturnsSummary {
            level: config.tolerances.return_level,
            burn_in: config.tolerances.return_burn_in,
            horizons,
            totals,
            per_trajectory: per,
            log_tdot_growth: Estimate::from_values(ok.iter().map(|r| r.log_tdot_growth).collect(), None),
        }
    });
    let boundary = config.wants(Statistic::Boundary).then(|| {
        let recs: Vec<BoundaryRecord> = ok.iter().filter_map(|r| r.boundary.clone()).collect();
        let mut kinds = BTreeMap::new();
        for r in &recs {
            let kind = match r.report.point {
                BoundaryPoint::FiberPoint { .. } => "FiberPoint",
                BoundaryPoint::NullDirection { .. } => "NullDirection",
                BoundaryPoint::GreatCircle { .. } => "GreatCircle",
                BoundaryPoint::TimelikeApex => "TimelikeApex",
            };
            *kinds.entry(kind.to_string()).or_insert(0) += 1;
        }
        let converged = recs.iter().filter(|r| r.report.converged()).count();
        BoundarySummary {
            kinds,
            converged_fraction: converged as f64 / config.n_traj as f64,
            records: recs,
        }
    });
    EnsembleStats {
        config: config.summary(),
        n_traj: config.n_traj,
        n_failed: failures.len(),
        failures,
        terminations,
        max_pseudo_norm_residual: records.iter().map(|r| r.max_pn).fold(0.0, f64::max),
        max_constraint_residual: records.iter().map(|r| r.max_c).fold(0.0, f64::max),
        statistics,
        ks,
        occupation_quantiles,
        clock,
        returns,
        boundary,
        regime_verdict: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::spatial::Fiber;

    fn small(model: &str, params: &[f64], fiber: &str) -> EnsembleConfig {
        let mut c = EnsembleConfig::new(catalog(model, params).unwrap(), fiber.parse::<Fiber>().unwrap(), 1.0);
        c.n_traj = 6;
        c.s_max = 20.0;
        c.ds = 1e-2;
        c.thin = 2;
        c.seed = 11;
        c
    }

    #[test]
    fn identical_across_worker_counts() {
        let c = small("sinh", &[], "h3");
        let one = run_ensemble_with(&c, &RunOptions { workers: Some(1), raw_csv_dir: None }).unwrap();
        let four = run_ensemble_with(&c, &RunOptions { workers: Some(4), raw_csv_dir: None }).unwrap();
        assert_eq!(one.to_json(), four.to_json());
    }

    #[test]
    fn single_trajectory_matches_simulate_full() {
        let mut c = small("power", &[1.0], "r3");
        c.n_traj = 1;
        let stats = run_ensemble(&c).unwrap();
        let traj = ensemble_trajectory(&c, initial_state(&c).unwrap(), 0);
        let rates = rate_estimate(&traj.temporal, &c.model, 0.5).unwrap();
        assert_eq!(stats.statistic("rate_tdot").unwrap().values, vec![rates.rate_tdot]);
        assert_eq!(stats.max_pseudo_norm_residual, traj.max_pseudo_norm_residual);
    }

    #[test]
    fn raw_csv_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small("constant", &[], "s3");
        c.n_traj = 2;
        c.statistics = vec![Statistic::Clock];
        run_ensemble_with(&c, &RunOptions { workers: Some(2), raw_csv_dir: Some(dir.path().into()) }).unwrap();
        assert!(dir.path().join("traj_0001.csv").exists());
        assert!(dir.path().join("traj_0001.csv.json").exists());
    }

    #[test]
    fn worker_env_parsing_defaults_sensibly() {
        assert!(worker_count() >= 1);
    }

    #[test]
    fn window_mean_is_exact_for_a_linear_log_tdot() {
        let m = catalog("constant", &[]).unwrap();
        let samples: Vec<TemporalSample> = (0..=40)
            .map(|k| {
                let s = 0.25 * k as f64;
                TemporalSample {
                    state: TemporalState::from_tdot(&m, s, 1.0 + s, (0.5 * s).exp()),
                    clock: 0.0,
                    conformal: 0.0,
                }
            })
            .collect();
        let path = TemporalPath {
            samples,
            terminated: Termination::ProperTimeBudget,
        };
        assert!((window_mean_log_tdot(&path, 2.0, 4.0) - 1.5).abs() < 1e-12);
        assert!((log_tdot_growth(&path) - 0.5 * 5.0).abs() < 1e-12);
    }
}

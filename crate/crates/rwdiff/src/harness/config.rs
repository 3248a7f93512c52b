//! Ensemble configuration read from the flat key-value format.
//!
//! ```text
//! model.family = sinh
//! fiber = h3
//! sigma = 1
//! ensemble.n_traj = 64
//! ensemble.s_max = 200
//! statistics = rates, clock, returns, occupation, boundary
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::modelfile::{self, ModelFileError};
use crate::expansion::{ExpansionModel, ModelSpec};
use crate::kv::{KvDoc, KvError};
use crate::spatial::boundary::BoundaryOptions;
use crate::spatial::Fiber;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Rates,
    Clock,
    Occupation,
    TimeAverage,
    Returns,
    Boundary,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::Rates,
        Statistic::Clock,
        Statistic::Occupation,
        Statistic::TimeAverage,
        Statistic::Returns,
        Statistic::Boundary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Rates => "rates",
            Statistic::Clock => "clock",
            Statistic::Occupation => "occupation",
            Statistic::TimeAverage => "time_average",
            Statistic::Returns => "returns",
            Statistic::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statistic::ALL
            .iter()
            .find(|k| k.name() == s.trim())
            .copied()
            .ok_or_else(|| invalid(format!("unknown statistic `{s}`")))
    }
}

/// Initial temporal condition; the spatial state always starts at the
/// fiber's base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    Tdot { t: f64, tdot: f64 },
    A { t: f64, a: f64 },
    Entrance { a0: f64 },
}

/// Estimator knobs and verdict tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Tail fraction used by the rate estimator.
    pub rate_tail: f64,
    /// Burn-in for occupation and time averages; `None` means s_max/4.
    pub burn_in: Option<f64>,
    /// Clock window as a fraction of the retained samples.
    pub clock_window: f64,
    /// Relative clock increment below which the clock counts as converging.
    pub clock_tol: f64,
    pub return_level: f64,
    pub return_burn_in: f64,
    pub boundary: BoundaryOptions,
    pub ks: f64,
    /// Fraction of trajectories a majority verdict needs.
    pub majority: f64,
    /// Last-doubling return increase, relative to the total, below which
    /// return counts count as stabilized.
    pub returns_stable: f64,
    /// Same ratio above which they count as still growing.
    pub returns_growing: f64,
    /// Floor on the rate of log ṫ for a transient verdict.
    pub rate_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rate_tail: 0.5,
            burn_in: None,
            clock_window: 0.1,
            clock_tol: crate::temporal::diagnostics::DEFAULT_TOL_CLOCK,
            return_level: 2.0,
            return_burn_in: 0.0,
            boundary: BoundaryOptions::default(),
            ks: 0.07,
            majority: 0.9,
            returns_stable: 0.05,
            returns_growing: 0.15,
            rate_floor: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub model: ExpansionModel,
    pub fiber: Fiber,
    pub sigma: f64,
    pub d: usize,
    pub n_traj: usize,
    pub ds: f64,
    pub s_max: f64,
    pub thin: usize,
    pub seed: u64,
    pub init: InitMode,
    pub statistics: Vec<Statistic>,
    pub tolerances: Tolerances,
}

/// Serializable echo of the configuration, embedded in the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub model: ModelSpec,
    pub fiber: String,
    pub sigma: f64,
    pub d: usize,
    pub n_traj: usize,
    pub ds: f64,
    pub s_max: f64,
    pub thin: usize,
    pub seed: u64,
    pub init: InitMode,
    pub statistics: Vec<Statistic>,
    pub tolerances: Tolerances,
}

pub const DEFAULT_N_TRAJ: usize = 64;
pub const DEFAULT_S_MAX: f64 = 200.0;
pub const DEFAULT_DS: f64 = 1e-3;
pub const DEFAULT_THIN: usize = 10;

const KEYS: &[&str] = &[
    "model.*",
    "fiber",
    "sigma",
    "d",
    "ensemble.n_traj",
    "ensemble.ds",
    "ensemble.s_max",
    "ensemble.thin",
    "ensemble.seed",
    "init.mode",
    "init.t",
    "init.tdot",
    "init.a",
    "init.a0",
    "statistics",
    "tol.rate_tail",
    "tol.burn_in",
    "tol.clock_window",
    "tol.clock",
    "tol.return_level",
    "tol.return_burn_in",
    "tol.tail_fraction",
    "tol.tail",
    "tol.certificate",
    "tol.ks",
    "tol.majority",
    "tol.returns_stable",
    "tol.returns_growing",
    "tol.rate_floor",
];

impl EnsembleConfig {
    /// Defaults for everything except the model and fiber.
    pub fn new(model: ExpansionModel, fiber: Fiber, sigma: f64) -> Self {
        EnsembleConfig {
            model,
            fiber,
            sigma,
            d: fiber.d,
            n_traj: DEFAULT_N_TRAJ,
            ds: DEFAULT_DS,
            s_max: DEFAULT_S_MAX,
            thin: DEFAULT_THIN,
            seed: 0,
            init: InitMode::Tdot { t: 1.0, tdot: 2.0 },
            statistics: Statistic::ALL.to_vec(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_doc(doc: &KvDoc, base_dir: &Path) -> Result<Self, ConfigError> {
        doc.reject_unknown(KEYS)?;
        let model = modelfile::model_from_doc(doc, "model.", base_dir)?;
        let fiber: Fiber = doc
            .require("fiber")?
            .parse()
            .map_err(|e: crate::spatial::fiber::FiberError| invalid(e.to_string()))?;
        let mut c = EnsembleConfig::new(model, fiber, doc.f64_or("sigma", 1.0)?);
        c.d = doc.usize_or("d", fiber.d)?;
        c.n_traj = doc.usize_or("ensemble.n_traj", c.n_traj)?;
        c.ds = doc.f64_or("ensemble.ds", c.ds)?;
        c.s_max = doc.f64_or("ensemble.s_max", c.s_max)?;
        c.thin = doc.usize_or("ensemble.thin", c.thin)?;
        c.seed = doc.u64_or("ensemble.seed", c.seed)?;
        c.init = match doc.get("init.mode").unwrap_or("tdot") {
            "tdot" => InitMode::Tdot {
                t: doc.f64_or("init.t", 1.0)?,
                tdot: doc.f64_or("init.tdot", 2.0)?,
            },
            "a" => InitMode::A {
                t: doc.f64_or("init.t", 1.0)?,
                a: doc.f64_or("init.a", 1.0)?,
            },
            "entrance" => InitMode::Entrance {
                a0: doc.f64_or("init.a0", 1.0)?,
            },
            other => return Err(invalid(format!("init.mode must be tdot, a or entrance, got `{other}`"))),
        };
        if let Some(list) = doc.get("statistics") {
            let mut stats = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<Vec<Statistic>, _>>()?;
            stats.sort();
            stats.dedup();
            c.statistics = stats;
        }
        let t = &mut c.tolerances;
        t.rate_tail = doc.f64_or("tol.rate_tail", t.rate_tail)?;
        t.burn_in = doc.opt_f64("tol.burn_in")?;
        t.clock_window = doc.f64_or("tol.clock_window", t.clock_window)?;
        t.clock_tol = doc.f64_or("tol.clock", t.clock_tol)?;
        t.return_level = doc.f64_or("tol.return_level", t.return_level)?;
        t.return_burn_in = doc.f64_or("tol.return_burn_in", t.return_burn_in)?;
        t.boundary.tail_fraction = doc.f64_or("tol.tail_fraction", t.boundary.tail_fraction)?;
        t.boundary.tol_tail = doc.f64_or("tol.tail", t.boundary.tol_tail)?;
        t.boundary.tol_cert = doc.f64_or("tol.certificate", t.boundary.tol_cert)?;
        t.ks = doc.f64_or("tol.ks", t.ks)?;
        t.majority = doc.f64_or("tol.majority", t.majority)?;
        t.returns_stable = doc.f64_or("tol.returns_stable", t.returns_stable)?;
        t.returns_growing = doc.f64_or("tol.returns_growing", t.returns_growing)?;
        t.rate_floor = doc.f64_or("tol.rate_floor", t.rate_floor)?;
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        EnsembleConfig::from_doc(&KvDoc::parse(text)?, base_dir)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        EnsembleConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_traj < 1 {
            return Err(invalid("ensemble.n_traj must be at least 1"));
        }
        if self.d != self.fiber.d {
            return Err(invalid(format!("d = {} disagrees with fiber {}", self.d, self.fiber)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be finite and nonnegative"));
        }
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return Err(invalid("ensemble.ds must be positive"));
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return Err(invalid("ensemble.s_max must be positive and finite"));
        }
        if self.thin < 1 {
            return Err(invalid("ensemble.thin must be at least 1"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tol.rate_tail", t.rate_tail),
            ("tol.clock_window", t.clock_window),
            ("tol.tail_fraction", t.boundary.tail_fraction),
            ("tol.majority", t.majority),
        ] {
            if !(v > 0.0 && v < 1.0 || name == "tol.majority" && v == 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(t.return_level > 1.0) {
            return Err(invalid("tol.return_level must exceed 1"));
        }
        match self.init {
            InitMode::Tdot { t, tdot } if !(tdot >= 1.0) || !self.model.in_domain(t) => {
                Err(invalid("init.tdot must be at least 1 and init.t inside the model domain"))
            }
            InitMode::A { t, a } if !(a >= 0.0) || !self.model.in_domain(t) => {
                Err(invalid("init.a must be nonnegative and init.t inside the model domain"))
            }
            InitMode::Entrance { a0 } if !(a0 > 0.0) => Err(invalid("init.a0 must be positive")),
            _ => Ok(()),
        }
    }

    /// Burn-in for occupation measures and time averages.
    pub fn burn_in(&self) -> f64 {
        self.tolerances.burn_in.unwrap_or(self.s_max / 4.0)
    }

    pub fn wants(&self, s: Statistic) -> bool {
        self.statistics.contains(&s)
    }

    pub fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            model: self.model.spec(),
            fiber: self.fiber.label(),
            sigma: self.sigma,
            d: self.d,
            n_traj: self.n_traj,
            ds: self.ds,
            s_max: self.s_max,
            thin: self.thin,
            seed: self.seed,
            init: self.init,
            statistics: self.statistics.clone(),
            tolerances: self.tolerances,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "model.family = power\nmodel.params = 2/3\nfiber = r3\nsigma = 0.5\n\
                    ensemble.n_traj = 8\nensemble.s_max = 20\ninit.mode = a\ninit.a = 0.3\n\
                    statistics = clock, rates, clock\ntol.ks = 0.05\n";
        let c = EnsembleConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(c.model.name(), catalog_name("power", &[2.0 / 3.0]));
        assert_eq!((c.n_traj, c.s_max, c.sigma, c.d), (8, 20.0, 0.5, 3));
        assert_eq!(c.init, InitMode::A { t: 1.0, a: 0.3 });
        assert_eq!(c.statistics, vec![Statistic::Rates, Statistic::Clock]);
        assert_eq!(c.tolerances.ks, 0.05);
        assert_eq!(c.burn_in(), 5.0);
    }

    fn catalog_name(f: &str, p: &[f64]) -> String {
        crate::expansion::catalog(f, p).unwrap().name()
    }

    #[test]
    fn rejects_bad_input() {
        let base = "model.family = sinh\nfiber = h3\n";
        assert!(EnsembleConfig::parse(base, Path::new(".")).is_ok());
        for extra in [
            "bogus = 1\n",
            "ensemble.n_traj = 0\n",
            "d = 4\n",
            "statistics = rates, nonsense\n",
            "init.mode = sideways\n",
            "tol.return_level = 1\n",
        ] {
            let text = format!("{base}{extra}");
            assert!(EnsembleConfig::parse(&text, Path::new(".")).is_err(), "{extra}");
        }
    }
}

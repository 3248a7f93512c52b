//! Ensembles, estimators and the empirical verification of predicted
//! regimes.

pub mod config;
pub mod covariance;
pub mod ensemble;
pub mod oracle;
pub mod stats;
pub mod verify;

pub use config::{EnsembleConfig, InitMode, Statistic, Tolerances};
pub use covariance::{noise_covariance_test, CovarianceReport};
pub use ensemble::{run_ensemble, run_ensemble_with, EnsembleError, EnsembleStats, Estimate, RunOptions};
pub use oracle::{oracle_compare, OracleConfig, OracleReport};
pub use stats::{ks_distance, occupation_measure, return_count, Weighted};
pub use verify::{verify_regime, ClaimVerdict, Outcome, VerdictReport};

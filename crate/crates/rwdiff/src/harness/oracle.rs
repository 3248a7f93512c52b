//! Cross-check of the production temporal scheme against the tamed (t, ṫ)
//! scheme on shared Brownian increments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::ExpansionModel;
use crate::rng::trajectory_rng;
use crate::temporal::diagnostics::lsq_slope;
use crate::temporal::scheme::step_with;
use crate::temporal::tamed::{simulate_tamed, TamedState};
use crate::temporal::{StepError, StepParams, TemporalState};

use super::stats::mean_se;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("need at least 3 step sizes, got {0}")]
    TooFewLevels(usize),
    #[error("step sizes must halve successively; {0} -> {1} does not")]
    NotHalving(f64, f64),
    #[error("s_max / h must be a positive integer for every h; {0} is not")]
    NonIntegralSteps(f64),
    #[error("scheme stopped at level h = {h}: {source}")]
    Step { h: f64, source: StepError },
    #[error("invalid setup: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub model: ExpansionModel,
    pub sigma: f64,
    pub d: usize,
    pub t0: f64,
    pub tdot0: f64,
    pub s_max: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub h: f64,
    /// Mean over paths of max_s |ṫ_scheme − ṫ_tamed| on the level grid.
    pub deviation: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub levels: Vec<OracleLevel>,
    /// Least-squares slope of log deviation against log h.
    pub fitted_order: f64,
    /// Deviation strictly decreases as h decreases.
    pub monotone: bool,
}

fn steps_for(s_max: f64, h: f64) -> Result<usize, OracleError> {
    let n = s_max / h;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-9 * r {
        return Err(OracleError::NonIntegralSteps(h));
    }
    Ok(r as usize)
}

/// Runs both schemes at every step size in `h_list` (decreasing, each half
/// the previous) with increments aggregated from the finest level.
pub fn oracle_compare(config: &OracleConfig, h_list: &[f64]) -> Result<OracleReport, OracleError> {
    if h_list.len() < 3 {
        return Err(OracleError::TooFewLevels(h_list.len()));
    }
    for w in h_list.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(OracleError::NotHalving(w[0], w[1]));
        }
    }
    if config.n_paths == 0 || !(config.tdot0 >= 1.0) || !config.model.in_domain(config.t0) {
        return Err(OracleError::Invalid("need n_paths ≥ 1, tdot0 ≥ 1 and t0 in the domain".into()));
    }
    let h_fine = *h_list.last().expect("nonempty");
    let n_fine = steps_for(config.s_max, h_fine)?;
    for &h in h_list {
        steps_for(config.s_max, h)?;
    }
    let mut p = StepParams::new(config.sigma, config.d, h_fine);
    p.adaptive = false;
    let mut per_level: Vec<Vec<f64>> = vec![Vec::with_capacity(config.n_paths); h_list.len()];
    for path in 0..config.n_paths {
        let mut rng = trajectory_rng(config.seed, path as u64);
        let fine: Vec<f64> = (0..n_fine).map(|_| rng.sample(StandardNormal)).collect();
        for (k, &h) in h_list.iter().enumerate() {
            let m = 1usize << (h_list.len() - 1 - k);
            let scale = (m as f64).sqrt().recip();
            let draws: Vec<f64> = fine.chunks(m).map(|c| c.iter().sum::<f64>() * scale).collect();
            let tamed = simulate_tamed(
                TamedState {
                    s: 0.0,
                    t: config.t0,
                    tdot: config.tdot0,
                },
                &config.model,
                config.sigma,
                config.d,
                h,
                &draws,
            );
            let mut st = TemporalState::from_tdot(&config.model, 0.0, config.t0, config.tdot0);
            let mut dev: f64 = 0.0;
            for (dw, reference) in draws.iter().zip(&tamed[1..]) {
                st = step_with(&st, &config.model, &p, h, *dw).map_err(|source| OracleError::Step { h, source })?;
                dev = dev.max((st.tdot() - reference.tdot).abs());
            }
            per_level[k].push(dev);
        }
    }
    let levels: Vec<OracleLevel> = h_list
        .iter()
        .zip(&per_level)
        .map(|(&h, devs)| {
            let (deviation, std_error) = mean_se(devs);
            OracleLevel {
                h,
                deviation,
                std_error,
            }
        })
        .collect();
    let lh: Vec<f64> = levels.iter().map(|l| l.h.ln()).collect();
    let ld: Vec<f64> = levels.iter().map(|l| l.deviation.ln()).collect();
    Ok(OracleReport {
        fitted_order: lsq_slope(&lh, &ld),
        monotone: levels.windows(2).all(|w| w[1].deviation < w[0].deviation),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;

    fn cfg(model: &str, sigma: f64) -> OracleConfig {
        OracleConfig {
            model: catalog(model, &[]).unwrap(),
            sigma,
            d: 3,
            t0: 1.0,
            tdot0: 1.5,
            s_max: 1.0,
            n_paths: 4,
            seed: 3,
        }
    }

    #[test]
    fn deterministic_case_is_first_order() {
        let r = oracle_compare(&cfg("sinh", 0.0), &[0.02, 0.01, 0.005, 0.0025]).unwrap();
        assert!(r.monotone);
        assert!((r.fitted_order - 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn rejects_bad_level_lists() {
        let c = cfg("sinh", 1.0);
        assert_eq!(oracle_compare(&c, &[0.1, 0.05]), Err(OracleError::TooFewLevels(2)));
        assert!(matches!(oracle_compare(&c, &[0.1, 0.04, 0.02]), Err(OracleError::NotHalving(..))));
        assert!(matches!(oracle_compare(&c, &[0.3, 0.15, 0.075]), Err(OracleError::NonIntegralSteps(_))));
    }
}

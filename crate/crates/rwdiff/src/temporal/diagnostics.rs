use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::ExpansionModel;

use super::path::TemporalPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("tail fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
}

/// Ordinary least-squares slope of y against x.
pub fn lsq_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Growth rates in proper time over the path tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub rate_tdot: f64,
    pub rate_alpha: f64,
    pub rate_int_alpha: f64,
}

/// Minimum number of tail samples accepted by [`rate_estimate`].
pub const MIN_TAIL_SAMPLES: usize = 100;

/// Least-squares slopes of log ṫ, log α(t) and log ∫₀ᵗ α against s over the
/// trailing `tail_fraction` of the samples.
pub fn rate_estimate(
    path: &TemporalPath,
    model: &ExpansionModel,
    tail_fraction: f64,
) -> Result<Rates, DiagnosticError> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(DiagnosticError::BadFraction(tail_fraction));
    }
    let n = path.samples.len();
    let start = ((1.0 - tail_fraction) * n as f64).floor() as usize;
    let tail = &path.samples[start..];
    if tail.len() < MIN_TAIL_SAMPLES {
        return Err(DiagnosticError::InsufficientSamples {
            needed: MIN_TAIL_SAMPLES,
            got: tail.len(),
        });
    }
    let s: Vec<f64> = tail.iter().map(|x| x.s()).collect();
    let log_tdot: Vec<f64> = tail.iter().map(|x| x.tdot().ln()).collect();
    let log_alpha: Vec<f64> = tail.iter().map(|x| x.state.log_alpha).collect();
    let log_int: Vec<f64> = tail.iter().map(|x| model.log_int_alpha(x.t())).collect();
    Ok(Rates {
        rate_tdot: lsq_slope(&s, &log_tdot),
        rate_alpha: lsq_slope(&s, &log_alpha),
        rate_int_alpha: lsq_slope(&s, &log_int),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum ClockVerdict {
    Converging { estimate: f64 },
    Diverging { slope: f64 },
}

impl ClockVerdict {
    pub fn is_converging(&self) -> bool {
        matches!(self, ClockVerdict::Converging { .. })
    }
}

/// Relative size of the final-window clock increment below which the clock
/// counts as converging.
pub const DEFAULT_TOL_CLOCK: f64 = 1e-2;

pub fn clock_diagnostic(path: &TemporalPath, window: usize) -> Result<ClockVerdict, DiagnosticError> {
    clock_diagnostic_with(path, window, DEFAULT_TOL_CLOCK)
}

/// Converging when the clock grows by less than `tol·C_end` over the last
/// `window` samples; otherwise Diverging with the least-squares slope of C
/// against s over that window.
pub fn clock_diagnostic_with(
    path: &TemporalPath,
    window: usize,
    tol: f64,
) -> Result<ClockVerdict, DiagnosticError> {
    let n = path.samples.len();
    if window == 0 || n < 2 * window {
        return Err(DiagnosticError::InsufficientSamples {
            needed: 2 * window.max(1),
            got: n,
        });
    }
    let tail = &path.samples[n - window..];
    let total = path.last().clock;
    let increment = total - path.samples[n - window - 1].clock;
    if increment <= tol * total {
        Ok(ClockVerdict::Converging { estimate: total })
    } else {
        let s: Vec<f64> = tail.iter().map(|x| x.s()).collect();
        let c: Vec<f64> = tail.iter().map(|x| x.clock).collect();
        Ok(ClockVerdict::Diverging { slope: lsq_slope(&s, &c) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::temporal::path::{PathRecorder, Termination};
    use crate::temporal::scheme::TemporalState;

    #[test]
    fn frozen_tdot_gives_linear_clock() {
        let m = catalog("constant", &[]).unwrap();
        let v: f64 = 2.0;
        let sigma = 1.5;
        let mut rec = PathRecorder::new(TemporalState::from_tdot(&m, 0.0, 1.0, v), sigma, 1);
        for k in 1..=400 {
            let s = 0.01 * k as f64;
            rec.push(TemporalState::from_tdot(&m, s, 1.0 + v * s, v));
        }
        let path = rec.finish(Termination::ProperTimeBudget).0;
        match clock_diagnostic(&path, 50).unwrap() {
            ClockVerdict::Diverging { slope } => {
                assert!((slope - sigma * sigma / (v * v - 1.0)).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((lsq_slope(&x, &y) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn short_paths_are_rejected() {
        let m = catalog("constant", &[]).unwrap();
        let path = PathRecorder::new(TemporalState::from_tdot(&m, 0.0, 1.0, 2.0), 1.0, 1)
            .finish(Termination::ProperTimeBudget)
            .0;
        assert!(clock_diagnostic(&path, 10).is_err());
        assert!(rate_estimate(&path, &m, 0.5).is_err());
    }
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::ExpansionModel;

/// Growth class of α at the future end of its time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum GrowthClass {
    Polynomial { c: f64 },
    Subexponential { kappa: f64 },
    Exponential { h_inf: f64 },
    BigCrunch,
}

impl GrowthClass {
    /// lim H(t) as t → ∞ (zero except for exponential growth).
    pub fn h_inf(&self) -> Option<f64> {
        match self {
            GrowthClass::Exponential { h_inf } => Some(*h_inf),
            GrowthClass::BigCrunch => None,
            _ => Some(0.0),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("probe grid has {0} points; at least 5 are needed")]
    GridTooShort(usize),
    #[error("tail estimate for {quantity} did not stabilize on the probe grid (last estimates {estimates:?})")]
    Indeterminate { quantity: &'static str, estimates: Vec<f64> },
}

#[derive(Debug, Clone, Copy)]
pub struct GrowthOptions {
    /// Agreement required between the last three extrapolated estimates.
    pub tol_h: f64,
    /// Margin below 1 that the log-ratio limit must respect for polynomial growth.
    pub tol_r: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            tol_h: 1e-3,
            tol_r: 1e-2,
        }
    }
}

/// Detailed output of [`classify_growth_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub class: GrowthClass,
    pub h_inf_estimate: Option<f64>,
    pub ht_limit: Option<f64>,
    pub log_ratio_limit: Option<f64>,
    pub kappa_estimate: Option<f64>,
}

/// Geometric grid t_k = t_min · 2^k, k = 0..n.
pub fn geometric_grid(t_min: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_min * 2f64.powi(k as i32)).collect()
}

/// Default probe grid: 12 points from 1 to 2048.
pub fn default_probe_grid() -> Vec<f64> {
    geometric_grid(1.0, 12)
}

/// Aitken Δ² transform of a sequence; terms with a vanishing second
/// difference are passed through unchanged.
pub fn aitken(seq: &[f64]) -> Vec<f64> {
    seq.windows(3)
        .map(|w| {
            let d1 = w[2] - w[1];
            let d2 = w[2] - 2.0 * w[1] + w[0];
            if d2.abs() <= 1e-13 * (w[2].abs() + w[1].abs() + w[0].abs()) || d2 == 0.0 {
                w[2]
            } else {
                w[2] - d1 * d1 / d2
            }
        })
        .collect()
}

/// Extrapolated tail limit: the last Aitken estimate, provided the last
/// three estimates agree within `tol`.
pub fn tail_limit(seq: &[f64], tol: f64) -> Result<f64, Vec<f64>> {
    let est = aitken(seq);
    if est.len() < 3 {
        return Err(est);
    }
    let last3 = &est[est.len() - 3..];
    let lo = last3.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = last3.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= tol && hi.is_finite() && lo.is_finite() {
        Ok(est[est.len() - 1])
    } else {
        Err(last3.to_vec())
    }
}

/// r(t) = log α(t) / log ∫₀ᵗ α on the points of `grid` where the
/// denominator exceeds one.
pub fn log_ratio_samples(model: &ExpansionModel, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .filter_map(|&t| {
            let den = model.log_int_alpha(t);
            (den > 1.0 && den.is_finite()).then(|| (t, model.log_alpha(t) / den))
        })
        .collect()
}

/// Limit of r(t) by least-squares fit r ≈ r∞ + b/L + b₂/L² in L = log t,
/// over the last (up to) six usable grid points.
pub fn log_ratio_limit(model: &ExpansionModel, grid: &[f64]) -> Option<f64> {
    let samples = log_ratio_samples(model, grid);
    let tail: Vec<(f64, f64)> = samples.iter().rev().take(6).cloned().collect();
    if tail.len() < 3 {
        return None;
    }
    if tail.iter().all(|(_, r)| *r == 0.0) {
        return Some(0.0);
    }
    // Normal equations for a quadratic in u = 1/log t.
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (t, r) in &tail {
        let u = 1.0 / t.ln();
        let phi = [1.0, u, u * u];
        for i in 0..3 {
            rhs[i] += phi[i] * r;
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
        }
    }
    solve3(m, rhs).map(|c| c[0])
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

/// Whether the absolute first differences of the tail shrink.
fn differences_shrink(seq: &[f64]) -> bool {
    let d: Vec<f64> = seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.len() >= 3 && d[d.len() - 3..].windows(2).all(|w| w[1] <= w[0] + 1e-15)
}

/// Classifies the growth of α with default tolerances.
pub fn classify_growth(model: &ExpansionModel, probe_grid: &[f64]) -> Result<GrowthClass, GrowthError> {
    classify_growth_with(model, probe_grid, GrowthOptions::default()).map(|r| r.class)
}

pub fn classify_growth_with(
    model: &ExpansionModel,
    probe_grid: &[f64],
    opts: GrowthOptions,
) -> Result<GrowthReport, GrowthError> {
    if model.has_finite_horizon() {
        return Ok(GrowthReport {
            class: GrowthClass::BigCrunch,
            h_inf_estimate: None,
            ht_limit: None,
            log_ratio_limit: None,
            kappa_estimate: None,
        });
    }
    if probe_grid.len() < 5 {
        return Err(GrowthError::GridTooShort(probe_grid.len()));
    }
    let hs: Vec<f64> = probe_grid.iter().map(|&t| model.hubble(t)).collect();
    let h_inf = tail_limit(&hs, opts.tol_h).map_err(|estimates| GrowthError::Indeterminate {
        quantity: "H_inf",
        estimates,
    })?;
    if h_inf > opts.tol_h {
        return Ok(GrowthReport {
            class: GrowthClass::Exponential { h_inf },
            h_inf_estimate: Some(h_inf),
            ht_limit: None,
            log_ratio_limit: None,
            kappa_estimate: None,
        });
    }

    let ht: Vec<f64> = probe_grid.iter().zip(&hs).map(|(t, h)| t * h).collect();
    let ratio = log_ratio_limit(model, probe_grid);
    let ht_converges = differences_shrink(&ht);
    let c = if ht_converges {
        Some(tail_limit(&ht, opts.tol_h).map_err(|estimates| GrowthError::Indeterminate {
            quantity: "H(t)*t",
            estimates,
        })?)
    } else {
        None
    };

    if let Some(c) = c {
        return match ratio {
            Some(r) if r < 1.0 - opts.tol_r => Ok(GrowthReport {
                class: GrowthClass::Polynomial { c: c.max(0.0) },
                h_inf_estimate: Some(h_inf),
                ht_limit: Some(c),
                log_ratio_limit: Some(r),
                kappa_estimate: None,
            }),
            other => Err(GrowthError::Indeterminate {
                quantity: "log-ratio limit",
                estimates: other.into_iter().collect(),
            }),
        };
    }

    let ks: Vec<f64> = probe_grid
        .iter()
        .zip(&hs)
        .map(|(&t, &h)| -model.hubble_prime(t) / (h * h))
        .collect();
    let half = &ks[ks.len() / 2..];
    let kappa = match tail_limit(&ks, opts.tol_h) {
        Ok(k) => k.max(0.0),
        Err(_) => half.iter().cloned().fold(0.0, f64::max),
    };
    Ok(GrowthReport {
        class: GrowthClass::Subexponential { kappa },
        h_inf_estimate: Some(h_inf),
        ht_limit: None,
        log_ratio_limit: ratio,
        kappa_estimate: Some(kappa),
    })
}

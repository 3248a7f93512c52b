use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, Improper, QuadError, TailEnd, TailOptions};

use super::model::{ExpansionModel, ModelError};

/// A nonnegative quantity that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    Finite(f64),
    Infinite,
}

impl Extent {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extent::Finite(_))
    }
}

/// I₋ = ∫₀^{c0} du/α and I₊ = ∫_{c0}^T du/α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonIntegrals {
    pub i_minus: Extent,
    pub i_plus: Extent,
    pub c0: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HorizonError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("{which}: neither convergence nor divergence could be certified (partial sum {partial})")]
    Indeterminate { which: String, partial: f64 },
    #[error("{0} requires an infinite time interval")]
    NeedsInfiniteHorizon(&'static str),
}

fn extent(r: Improper, which: &str) -> Result<Extent, HorizonError> {
    match r {
        Improper::Finite { value } => Ok(Extent::Finite(value)),
        Improper::Infinite => Ok(Extent::Infinite),
        Improper::Indeterminate { partial } => Err(HorizonError::Indeterminate {
            which: which.to_string(),
            partial,
        }),
    }
}

/// Conventional split point: 1 for T = ∞, T/2 otherwise.
pub fn default_split_point(model: &ExpansionModel) -> f64 {
    if model.has_finite_horizon() {
        0.5 * model.t_end()
    } else {
        1.0
    }
}

fn inv_alpha(model: &ExpansionModel) -> impl Fn(f64) -> f64 + '_ {
    move |t| (-model.log_alpha(t)).exp()
}

pub fn horizon_integrals(
    model: &ExpansionModel,
    c0: f64,
    tol: f64,
) -> Result<HorizonIntegrals, HorizonError> {
    model.check_domain(c0)?;
    let f = inv_alpha(model);
    let opts = TailOptions::default();
    let minus = quadrature::improper_tail(&f, c0, TailEnd::Zero, tol, opts)?;
    let end = if model.has_finite_horizon() {
        TailEnd::Finite(model.t_end())
    } else {
        TailEnd::Infinity
    };
    let plus = quadrature::improper_tail(&f, c0, end, tol, opts)?;
    Ok(HorizonIntegrals {
        i_minus: extent(minus, "I-")?,
        i_plus: extent(plus, "I+")?,
        c0,
    })
}

/// ∫_{t0}^{t} du/α(u); antisymmetric in its endpoints.
pub fn conformal_time(model: &ExpansionModel, t0: f64, t: f64) -> Result<f64, HorizonError> {
    model.check_domain(t0)?;
    model.check_domain(t)?;
    Ok(quadrature::integrate_geometric(inv_alpha(model), t0, t, 1e-12)?)
}

/// Remaining variation ∫_t^T du/α: bounds the fiber distance still to be
/// travelled when I₊ < ∞.
pub fn remaining_variation(model: &ExpansionModel, t: f64, tol: f64) -> Result<Improper, HorizonError> {
    model.check_domain(t)?;
    let end = if model.has_finite_horizon() {
        TailEnd::Finite(model.t_end())
    } else {
        TailEnd::Infinity
    };
    Ok(quadrature::improper_tail(inv_alpha(model), t, end, tol, TailOptions::default())?)
}

/// ∫_{1}^{∞} H(u)^p du with divergence detection.
pub fn hubble_power_integral(model: &ExpansionModel, p: f64, tol: f64) -> Result<Improper, HorizonError> {
    if model.has_finite_horizon() {
        return Err(HorizonError::NeedsInfiniteHorizon("H-power integrability"));
    }
    let f = |t: f64| model.hubble(t).max(0.0).powf(p);
    Ok(quadrature::improper_tail(f, 1.0, TailEnd::Infinity, tol, TailOptions::default())?)
}

/// Whether H^d is integrable at +∞.
pub fn hd_integrable(model: &ExpansionModel, d: usize, tol: f64) -> Result<bool, HorizonError> {
    match hubble_power_integral(model, d as f64, tol)? {
        Improper::Finite { .. } => Ok(true),
        Improper::Infinite => Ok(false),
        Improper::Indeterminate { partial } => Err(HorizonError::Indeterminate {
            which: format!("integral of H^{d}"),
            partial,
        }),
    }
}

/// Power-law decay exponent p of H far in the tail (H ~ t^{−p}), measured
/// between t = 2^400 and t = 2^500. Infinite when H vanishes there.
pub fn tail_power_exponent(model: &ExpansionModel) -> f64 {
    let (t1, t2) = (2f64.powi(400), 2f64.powi(500));
    let (h1, h2) = (model.hubble(t1), model.hubble(t2));
    if h2 <= 0.0 || h1 <= 0.0 {
        return f64::INFINITY;
    }
    -(h2.ln() - h1.ln()) / (t2.ln() - t1.ln())
}

//! One Euler–Maruyama step of the temporal sub-diffusion in (t, a²).
//!
//! The state keeps u = a/α(t) = √(ṫ² − 1) together with log α(t) instead of
//! a itself. The update below is the a²-update divided through by α(t)², so
//! it is algebraically the same scheme while staying finite when α overflows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::ExpansionModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalState {
    /// Proper time.
    pub s: f64,
    /// Cosmological time.
    pub t: f64,
    /// u = a/α(t) = √(ṫ² − 1) ≥ 0.
    pub u: f64,
    /// Cached log α(t).
    pub log_alpha: f64,
}

impl TemporalState {
    /// State from the a-coordinate.
    pub fn new(model: &ExpansionModel, s: f64, t: f64, a: f64) -> Self {
        let log_alpha = model.log_alpha(t);
        TemporalState {
            s,
            t,
            u: a * (-log_alpha).exp(),
            log_alpha,
        }
    }

    /// State from ṫ ≥ 1.
    pub fn from_tdot(model: &ExpansionModel, s: f64, t: f64, tdot: f64) -> Self {
        TemporalState {
            s,
            t,
            u: (tdot * tdot - 1.0).max(0.0).sqrt(),
            log_alpha: model.log_alpha(t),
        }
    }

    pub fn tdot(&self) -> f64 {
        self.u.hypot(1.0)
    }

    /// a = α(t)·√(ṫ² − 1); may overflow to +∞ for astronomically large α.
    pub fn a(&self) -> f64 {
        self.u * self.log_alpha.exp()
    }

    /// Spatial speed |ẋ| = a/α² = u/α.
    pub fn spatial_speed(&self) -> f64 {
        self.u * (-self.log_alpha).exp()
    }

    /// Relative pseudo-norm residual (−ṫ² + α²|ẋ|² + 1)/ṫ².
    pub fn pseudo_norm_residual(&self) -> f64 {
        let td = self.tdot();
        (-td * td + self.u * self.u + 1.0) / (td * td)
    }

    pub fn is_valid(&self) -> bool {
        self.s.is_finite() && self.t.is_finite() && self.u.is_finite() && self.u >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub sigma: f64,
    pub d: usize,
    pub ds: f64,
    pub adaptive: bool,
    pub eps_horizon: f64,
}

impl StepParams {
    pub fn new(sigma: f64, d: usize, ds: f64) -> Self {
        StepParams {
            sigma,
            d,
            ds,
            adaptive: true,
            eps_horizon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(StepError::InvalidParams(format!("sigma = {}", self.sigma)));
        }
        if self.d < 1 {
            return Err(StepError::InvalidParams("d must be positive".into()));
        }
        if !(self.ds > 0.0) || !self.ds.is_finite() {
            return Err(StepError::InvalidParams(format!("ds = {}", self.ds)));
        }
        if !(self.eps_horizon > 0.0) {
            return Err(StepError::InvalidParams(format!("eps_horizon = {}", self.eps_horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite arithmetic at s = {s}, t = {t}")]
    NumericalFailure { s: f64, t: f64 },
    #[error("state is within the horizon margin (t = {t}, T = {t_end})")]
    HorizonReached { t: f64, t_end: f64 },
    #[error("invalid step parameters: {0}")]
    InvalidParams(String),
}

/// Step size actually used from `state`: `ds`, capped near a finite
/// horizon so that ṫ·h ≤ (T − t)/10.
pub fn step_size(state: &TemporalState, model: &ExpansionModel, p: &StepParams) -> f64 {
    let t_end = model.t_end();
    if p.adaptive && t_end.is_finite() {
        p.ds.min((t_end - state.t) / (10.0 * state.tdot()))
    } else {
        p.ds
    }
}

/// Advances by one step of size `h` with standard normal draw `dw`.
pub fn step_with(
    state: &TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    h: f64,
    dw: f64,
) -> Result<TemporalState, StepError> {
    let t_end = model.t_end();
    if state.t >= t_end - p.eps_horizon {
        return Err(StepError::HorizonReached { t: state.t, t_end });
    }
    let sig2 = p.sigma * p.sigma;
    let d = p.d as f64;
    let u = state.u;
    let u2 = u * u;
    // a²'/α(t)² with the drift and bracket of the a²-equation.
    let bracket = u2 * (1.0 + (d + 1.0) * sig2 * h)
        + d * sig2 * h
        + 2.0 * p.sigma * h.sqrt() * dw * u2.hypot(u);
    let v = bracket.max(0.0).sqrt();
    let t_new = state.t + state.tdot() * h;
    if t_new >= t_end {
        return Err(StepError::HorizonReached { t: state.t, t_end });
    }
    let la_new = model.log_alpha(t_new);
    let u_new = v * (state.log_alpha - la_new).exp();
    let next = TemporalState {
        s: state.s + h,
        t: t_new,
        u: u_new,
        log_alpha: la_new,
    };
    if !next.is_valid() || !la_new.is_finite() {
        return Err(StepError::NumericalFailure { s: state.s, t: state.t });
    }
    Ok(next)
}

/// One step with the default (possibly adaptive) step size.
pub fn step_temporal(
    state: &TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    dw: f64,
) -> Result<TemporalState, StepError> {
    step_with(state, model, p, step_size(state, model, p), dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;

    fn flat() -> ExpansionModel {
        catalog("constant", &[]).unwrap()
    }

    #[test]
    fn static_geodesic_without_noise() {
        let m = flat();
        let p = StepParams::new(0.0, 3, 0.01);
        let s0 = TemporalState::new(&m, 0.0, 1.0, 0.0);
        let s1 = step_temporal(&s0, &m, &p, 0.7).unwrap();
        assert!((s1.t - 1.01).abs() < 1e-15);
        assert_eq!(s1.a(), 0.0);
    }

    #[test]
    fn moving_geodesic_without_noise() {
        let m = flat();
        let p = StepParams::new(0.0, 3, 0.01);
        let mut s = TemporalState::new(&m, 0.0, 1.0, 1.0);
        for _ in 0..100 {
            s = step_temporal(&s, &m, &p, -1.3).unwrap();
        }
        assert!((s.a() - 1.0).abs() < 1e-14);
        assert!((s.t - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn single_step_against_hand_arithmetic() {
        // σ = 1, d = 3, α ≡ 1, a² = 1, ds = 0.01, dW = 0.5:
        // a²' = 1 + (4·1 + 3·1)·0.01 + 2·√(1·2)·0.1·0.5 = 1.07 + 0.1·√2.
        let m = flat();
        let p = StepParams::new(1.0, 3, 0.01);
        let s0 = TemporalState::new(&m, 0.0, 1.0, 1.0);
        let s1 = step_temporal(&s0, &m, &p, 0.5).unwrap();
        let expected = 1.07 + 0.1 * 2f64.sqrt();
        assert!((s1.a() * s1.a() - expected).abs() < 1e-14);
        assert!((s1.t - (1.0 + 2f64.sqrt() * 0.01)).abs() < 1e-15);

        // a² = 4: a²' = 4 + (4·4 + 3)·0.01 + 2·√(4·5)·0.1·0.5.
        let s0 = TemporalState::new(&m, 0.0, 1.0, 2.0);
        let s1 = step_temporal(&s0, &m, &p, 0.5).unwrap();
        let expected = 4.19 + 0.1 * 20f64.sqrt();
        assert!((s1.a() * s1.a() - expected).abs() < 1e-13);
    }

    #[test]
    fn truncation_keeps_a_nonnegative() {
        let m = flat();
        let p = StepParams::new(1.0, 3, 0.01);
        let s0 = TemporalState::new(&m, 0.0, 1.0, 0.01);
        let s1 = step_temporal(&s0, &m, &p, -50.0).unwrap();
        assert_eq!(s1.u, 0.0);
        assert!(s1.t > s0.t);
    }

    #[test]
    fn adaptive_step_respects_horizon() {
        let m = catalog("big_crunch_radiation", &[]).unwrap();
        let p = StepParams::new(1.0, 3, 0.1);
        let s0 = TemporalState::from_tdot(&m, 0.0, 1.99, 50.0);
        let h = step_size(&s0, &m, &p);
        assert!(h * s0.tdot() <= 0.01 / 10.0 + 1e-15);
        let near = TemporalState::from_tdot(&m, 0.0, 2.0 - 1e-9, 2.0);
        assert!(matches!(
            step_temporal(&near, &m, &p, 0.0),
            Err(StepError::HorizonReached { .. })
        ));
    }

    #[test]
    fn scaled_state_survives_huge_alpha() {
        let m = catalog("exponential", &[1.0]).unwrap();
        let p = StepParams::new(1.0, 3, 0.001);
        let s0 = TemporalState::from_tdot(&m, 0.0, 900.0, 1.5);
        let s1 = step_temporal(&s0, &m, &p, 0.2).unwrap();
        assert!(s1.tdot().is_finite() && s1.tdot() > 1.0);
        assert!(s1.pseudo_norm_residual().abs() < 1e-15);
    }
}

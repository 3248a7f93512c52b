use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::growth::{self, GrowthError};
use crate::expansion::ExpansionModel;

use super::path::{PathRecorder, TemporalPath, Termination};
use super::scheme::{step_with, StepError, StepParams, TemporalState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("the comparison coupling needs T = +inf")]
    FiniteHorizon,
    #[error(transparent)]
    Growth(#[from] GrowthError),
}

/// One-step map shared by the three coupled processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScheme {
    /// Drift-implicit step for u = a/α, increasing in u for every draw
    /// with |dW| < 1/(σ√h), so the coupled paths keep their order.
    #[default]
    Monotone,
    /// The production Euler step on a² with truncation at zero.
    Primary,
}

/// Solves u' = B + C/u' for u' > 0 with
/// B = u(1 + dσ²h/2) + σ√h·√(1 + u²)·dW and C = (d − 1)σ²h/2, then
/// rescales by α(t)/α(t + ṫh) as the primary step does.
pub fn step_monotone(
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
    let b = u * (1.0 + 0.5 * d * sig2 * h) + p.sigma * h.sqrt() * u.hypot(1.0) * dw;
    let c = 0.5 * (d - 1.0) * sig2 * h;
    let root = (b * b + 4.0 * c).sqrt();
    // Both branches equal the positive root; the second avoids cancellation when b < 0.
    let v = if b >= 0.0 { 0.5 * (b + root) } else { 2.0 * c / (root - b) };
    let t_new = state.t + state.tdot() * h;
    if t_new >= t_end {
        return Err(StepError::HorizonReached { t: state.t, t_end });
    }
    let la_new = model.log_alpha(t_new);
    let next = TemporalState {
        s: state.s + h,
        t: t_new,
        u: v * (state.log_alpha - la_new).exp(),
        log_alpha: la_new,
    };
    if !next.is_valid() || !la_new.is_finite() {
        return Err(StepError::NumericalFailure { s: state.s, t: state.t });
    }
    Ok(next)
}

/// Lower frozen-H process, true ṫ and upper frozen-H process, all driven
/// by the same Brownian increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTriple {
    pub h_lower: f64,
    pub h_upper: f64,
    pub u_path: TemporalPath,
    pub tdot_path: TemporalPath,
    pub v_path: TemporalPath,
}

impl ComparisonTriple {
    /// Samples where u ≤ ṫ ≤ v fails by more than `slack·max(1, ṫ)`.
    pub fn violations(&self, slack: f64) -> usize {
        self.u_path
            .samples
            .iter()
            .zip(&self.tdot_path.samples)
            .zip(&self.v_path.samples)
            .filter(|((u, x), v)| {
                let (u, x, v) = (u.tdot(), x.tdot(), v.tdot());
                let tol = slack * x.max(1.0);
                u > x + tol || x > v + tol
            })
            .count()
    }
}

/// Runs the coupled triple from `init` for proper time `s_max`, keeping
/// every `thin`-th step. The lower process freezes H at H(t₀), the upper
/// one at H_∞; both run on α_frozen(t) = e^{H t}.
pub fn comparison_triple<R: Rng + ?Sized>(
    init: &TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    s_max: f64,
    thin: usize,
    rng: &mut R,
) -> Result<ComparisonTriple, ComparisonError> {
    comparison_triple_with(init, model, p, s_max, thin, CouplingScheme::Monotone, rng)
}

pub fn comparison_triple_with<R: Rng + ?Sized>(
    init: &TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    s_max: f64,
    thin: usize,
    scheme: CouplingScheme,
    rng: &mut R,
) -> Result<ComparisonTriple, ComparisonError> {
    if model.has_finite_horizon() {
        return Err(ComparisonError::FiniteHorizon);
    }
    let h_lower = model.hubble(init.t);
    let h_upper = growth::classify_growth(model, &growth::default_probe_grid())?
        .h_inf()
        .unwrap_or(0.0);
    let lower = ExpansionModel::exponential(h_lower);
    let upper = ExpansionModel::exponential(h_upper);
    let tdot0 = init.tdot();
    let mut states = [
        TemporalState::from_tdot(&lower, init.s, init.t, tdot0),
        *init,
        TemporalState::from_tdot(&upper, init.s, init.t, tdot0),
    ];
    let models = [&lower, model, &upper];
    let mut recs: Vec<PathRecorder> = states.iter().map(|s| PathRecorder::new(*s, p.sigma, thin)).collect();
    let fixed = StepParams { adaptive: false, ..*p };
    let terminated = loop {
        let remaining = s_max - states[1].s;
        if remaining <= 1e-12 * s_max.max(1.0) {
            break Termination::ProperTimeBudget;
        }
        let h = fixed.ds.min(remaining);
        let dw: f64 = rng.sample(StandardNormal);
        let mut failure = None;
        let mut next = states;
        for k in 0..3 {
            let stepped = match scheme {
                CouplingScheme::Monotone => step_monotone(&states[k], models[k], &fixed, h, dw),
                CouplingScheme::Primary => step_with(&states[k], models[k], &fixed, h, dw),
            };
            match stepped {
                Ok(s) => next[k] = s,
                Err(e) => {
                    failure = Some(Termination::NumericalFailure {
                        s: states[k].s,
                        t: states[k].t,
                        reason: e.to_string(),
                    });
                    break;
                }
            }
        }
        if let Some(f) = failure {
            break f;
        }
        states = next;
        for (rec, s) in recs.iter_mut().zip(states) {
            rec.push(s);
        }
    };
    let mut paths = recs.into_iter().map(|r| r.finish(terminated.clone()).0);
    Ok(ComparisonTriple {
        h_lower,
        h_upper,
        u_path: paths.next().unwrap(),
        tdot_path: paths.next().unwrap(),
        v_path: paths.next().unwrap(),
    })
}

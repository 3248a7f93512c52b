use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::horizon::{self, Extent, HorizonError};
use crate::expansion::ExpansionModel;

use super::scheme::{step_size, step_with, StepError, StepParams, TemporalState};

/// Why a trajectory stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause")]
pub enum Termination {
    HorizonReached { t: f64 },
    ProperTimeBudget,
    NumericalFailure { s: f64, t: f64, reason: String },
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::NumericalFailure { .. })
    }
}

/// One retained sample with its cumulative integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalSample {
    pub state: TemporalState,
    /// C_s = σ²∫ ds/(ṫ² − 1).
    pub clock: f64,
    /// A_s = ∫ a/α² ds.
    pub conformal: f64,
}

impl TemporalSample {
    pub fn s(&self) -> f64 {
        self.state.s
    }
    pub fn t(&self) -> f64 {
        self.state.t
    }
    pub fn tdot(&self) -> f64 {
        self.state.tdot()
    }
    pub fn a(&self) -> f64 {
        self.state.a()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPath {
    pub samples: Vec<TemporalSample>,
    pub terminated: Termination,
}

impl TemporalPath {
    pub fn last(&self) -> &TemporalSample {
        self.samples.last().expect("paths always hold the initial sample")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Clock and conformal increments over one step, by the trapezoid rule.
/// When u vanishes at one end the clock integrand is infinite there and
/// the other endpoint is used for the whole step.
pub fn increments(prev: &TemporalState, next: &TemporalState, sigma: f64) -> (f64, f64) {
    let h = next.s - prev.s;
    let dclock = if sigma == 0.0 {
        0.0
    } else {
        let s2 = sigma * sigma;
        match (prev.u > 0.0, next.u > 0.0) {
            (true, true) => 0.5 * s2 * h * (1.0 / (prev.u * prev.u) + 1.0 / (next.u * next.u)),
            (true, false) => s2 * h / (prev.u * prev.u),
            (false, true) => s2 * h / (next.u * next.u),
            (false, false) => 0.0,
        }
    };
    let dconf = 0.5 * h * (prev.spatial_speed() + next.spatial_speed());
    (dclock, dconf)
}

/// Accumulates clock and conformal integrals and keeps every `thin`-th
/// step plus the final state.
#[derive(Debug, Clone)]
pub struct PathRecorder {
    samples: Vec<TemporalSample>,
    current: TemporalSample,
    thin: usize,
    steps: usize,
    sigma: f64,
    capped_below: f64,
}

impl PathRecorder {
    pub fn new(init: TemporalState, sigma: f64, thin: usize) -> Self {
        let first = TemporalSample {
            state: init,
            clock: 0.0,
            conformal: 0.0,
        };
        PathRecorder {
            samples: vec![first],
            current: first,
            thin: thin.max(1),
            steps: 0,
            sigma,
            capped_below: 0.0,
        }
    }

    /// Also retains every step shorter than `ds`, so that the horizon
    /// approach of a finite-lifetime path is kept in full whatever `thin`.
    pub fn retaining_capped_steps(mut self, ds: f64) -> Self {
        self.capped_below = ds * (1.0 - 1e-9);
        self
    }

    pub fn current(&self) -> &TemporalSample {
        &self.current
    }

    /// Records the step to `next` and returns the new sample and whether it
    /// was retained.
    pub fn push(&mut self, next: TemporalState) -> (TemporalSample, bool) {
        let h = next.s - self.current.state.s;
        let (dc, da) = increments(&self.current.state, &next, self.sigma);
        self.current = TemporalSample {
            state: next,
            clock: self.current.clock + dc,
            conformal: self.current.conformal + da,
        };
        self.steps += 1;
        let keep = self.steps % self.thin == 0 || h < self.capped_below;
        if keep {
            self.samples.push(self.current);
        }
        (self.current, keep)
    }

    /// Appends the final state if thinning skipped it; returns whether it
    /// was appended.
    pub fn finish(mut self, terminated: Termination) -> (TemporalPath, bool) {
        let appended = self.samples.last().map(|s| s.state.s) != Some(self.current.state.s);
        if appended {
            self.samples.push(self.current);
        }
        (
            TemporalPath {
                samples: self.samples,
                terminated,
            },
            appended,
        )
    }
}

/// Outcome of a single driver step.
pub enum Advance {
    Moved(TemporalState),
    Stop(Termination),
}

/// Computes the next state (step clipped at `s_max`) or the reason to stop.
pub fn advance<R: Rng + ?Sized>(
    state: &TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    s_max: f64,
    rng: &mut R,
) -> Advance {
    let remaining = s_max - state.s;
    if remaining <= 1e-12 * s_max.abs().max(1.0) {
        return Advance::Stop(Termination::ProperTimeBudget);
    }
    if state.t >= model.t_end() - p.eps_horizon {
        return Advance::Stop(Termination::HorizonReached { t: state.t });
    }
    let h = step_size(state, model, p).min(remaining);
    let dw: f64 = rng.sample(StandardNormal);
    match step_with(state, model, p, h, dw) {
        Ok(next) => Advance::Moved(next),
        Err(StepError::HorizonReached { t, .. }) => Advance::Stop(Termination::HorizonReached { t }),
        Err(e) => Advance::Stop(Termination::NumericalFailure {
            s: state.s,
            t: state.t,
            reason: e.to_string(),
        }),
    }
}

/// Simulates the temporal process from `init` until `s_max` or the horizon.
pub fn simulate_temporal<R: Rng + ?Sized>(
    init: TemporalState,
    model: &ExpansionModel,
    p: &StepParams,
    s_max: f64,
    thin: usize,
    rng: &mut R,
) -> TemporalPath {
    if let Err(e) = p.validate() {
        return PathRecorder::new(init, p.sigma, thin)
            .finish(Termination::NumericalFailure {
                s: init.s,
                t: init.t,
                reason: e.to_string(),
            })
            .0;
    }
    let mut rec = PathRecorder::new(init, p.sigma, thin).retaining_capped_steps(p.ds);
    let mut state = init;
    let terminated = loop {
        match advance(&state, model, p, s_max, rng) {
            Advance::Moved(next) => {
                rec.push(next);
                state = next;
            }
            Advance::Stop(cause) => break cause,
        }
    };
    rec.finish(terminated).0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntranceError {
    #[error("the past horizon integral is infinite; no entrance law from t = 0")]
    InfinitePastHorizon,
    #[error(transparent)]
    Horizon(#[from] HorizonError),
    #[error("a0 must be positive, got {0}")]
    NonPositiveA0(f64),
    #[error("no grid time reaches the alpha floor inside the domain")]
    NoStart,
}

/// Default floor for the entrance start, relative to the grid supremum of α.
pub const ALPHA_FLOOR_REL: f64 = 1e-3;

/// Regularized start just after t = 0 for models with a finite past
/// horizon: the smallest time on the grid c0·2^{−k/4} (k = 0..240) where α
/// reaches `ALPHA_FLOOR_REL` times its grid supremum.
pub fn entrance_start(
    model: &ExpansionModel,
    a0: f64,
    p: &StepParams,
) -> Result<TemporalState, EntranceError> {
    entrance_start_with(model, a0, p, ALPHA_FLOOR_REL)
}

pub fn entrance_start_with(
    model: &ExpansionModel,
    a0: f64,
    p: &StepParams,
    floor_rel: f64,
) -> Result<TemporalState, EntranceError> {
    if !(a0 > 0.0) {
        return Err(EntranceError::NonPositiveA0(a0));
    }
    let c0 = horizon::default_split_point(model);
    let h = horizon::horizon_integrals(model, c0, 1e-6)?;
    if h.i_minus == Extent::Infinite {
        return Err(EntranceError::InfinitePastHorizon);
    }
    let grid: Vec<f64> = (0..=240)
        .map(|k| c0 * 2f64.powf(-(k as f64) / 4.0))
        .filter(|&t| model.in_domain(t) && t < model.t_end() - p.eps_horizon)
        .collect();
    let log_sup = grid
        .iter()
        .map(|&t| model.log_alpha(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let log_floor = log_sup + floor_rel.ln();
    let t_start = grid
        .iter()
        .cloned()
        .filter(|&t| model.log_alpha(t) >= log_floor)
        .fold(f64::INFINITY, f64::min);
    if !t_start.is_finite() {
        return Err(EntranceError::NoStart);
    }
    Ok(TemporalState::new(model, 0.0, t_start, a0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::rng::trajectory_rng;

    #[test]
    fn static_line_without_noise() {
        let m = catalog("constant", &[]).unwrap();
        let p = StepParams::new(0.0, 3, 0.01);
        let init = TemporalState::new(&m, 0.0, 2.0, 0.0);
        let path = simulate_temporal(init, &m, &p, 5.0, 1, &mut trajectory_rng(1, 0));
        assert_eq!(path.terminated, Termination::ProperTimeBudget);
        for smp in &path.samples {
            assert!((smp.t() - (2.0 + smp.s())).abs() < 1e-12);
        }
        assert!((path.last().s() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn big_crunch_reaches_horizon() {
        let m = catalog("big_crunch_radiation", &[]).unwrap();
        let p = StepParams::new(1.0, 3, 1e-3);
        let init = TemporalState::from_tdot(&m, 0.0, 1.0, 1.5);
        let path = simulate_temporal(init, &m, &p, 1e3, 100, &mut trajectory_rng(3, 0));
        assert!(matches!(path.terminated, Termination::HorizonReached { .. }), "{:?}", path.terminated);
        assert!(path.last().t() > 2.0 - 1e-6);
        let capped = path.samples.windows(2).filter(|w| w[1].s() - w[0].s() < 1e-3 * 0.999).count();
        assert!(capped > 50, "{capped}");
        let regular = path.samples.windows(2).filter(|w| w[1].s() - w[0].s() > 1e-3).count();
        assert!(path.samples.iter().all(|s| s.s() <= path.last().s()) && regular < 10, "{regular}");
    }

    #[test]
    fn infinite_lifetime_exhausts_budget() {
        let m = catalog("sinh", &[]).unwrap();
        let p = StepParams::new(1.0, 3, 1e-3);
        let init = TemporalState::from_tdot(&m, 0.0, 1.0, 1.5);
        let path = simulate_temporal(init, &m, &p, 5.0, 10, &mut trajectory_rng(3, 1));
        assert_eq!(path.terminated, Termination::ProperTimeBudget);
        let s: Vec<f64> = path.samples.iter().map(|x| x.s()).collect();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert!(path
            .samples
            .windows(2)
            .all(|w| w[1].clock >= w[0].clock && w[1].conformal >= w[0].conformal && w[1].t() >= w[0].t()));
    }

    #[test]
    fn entrance_examples() {
        let p = StepParams::new(1.0, 3, 1e-3);
        let m = catalog("power", &[2.0 / 3.0]).unwrap();
        let st = entrance_start(&m, 1.0, &p).unwrap();
        assert!(st.t > 0.0 && st.t < 1e-3 && (st.a() - 1.0).abs() < 1e-12);
        assert!(model_alpha_at_least(&m, st.t, 1e-3));
        assert_eq!(
            entrance_start(&catalog("power", &[1.0]).unwrap(), 1.0, &p),
            Err(EntranceError::InfinitePastHorizon)
        );
        let b = catalog("big_crunch_radiation", &[]).unwrap();
        let st = entrance_start(&b, 2.0, &p).unwrap();
        assert!(st.t > 0.0 && st.t < 1e-3);
    }

    fn model_alpha_at_least(m: &ExpansionModel, t: f64, v: f64) -> bool {
        m.alpha(t) >= v * (1.0 - 1e-12)
    }
}

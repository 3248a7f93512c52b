use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::expansion::ExpansionModel;
use crate::temporal::path::{advance, Advance, PathRecorder};
use crate::temporal::{StepParams, TemporalPath, TemporalState, Termination};

use super::chart::{step_chart, HyperbolicChart};
use super::fiber::{Fiber, FiberKind};
use super::step::{constraint_residual, noise_len, step_spatial, SpatialError, SpatialState};

/// Working representation of the spatial state between steps.
enum Walker {
    Ambient(SpatialState),
    Chart(HyperbolicChart),
}

impl Walker {
    fn new(sp: SpatialState, fiber: &Fiber) -> Result<Self, SpatialError> {
        Ok(match fiber.kind {
            FiberKind::Hyperbolic => Walker::Chart(HyperbolicChart::from_state(&sp)?),
            _ => Walker::Ambient(sp),
        })
    }

    fn state(&self) -> SpatialState {
        match self {
            Walker::Ambient(sp) => sp.clone(),
            Walker::Chart(c) => c.to_state(),
        }
    }
}

/// Temporal path with the spatial state at every retained sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub fiber: Fiber,
    pub temporal: TemporalPath,
    pub spatial: Vec<SpatialState>,
    /// Largest constraint residual seen after any step (not only retained ones).
    pub max_constraint_residual: f64,
    /// Largest pseudo-norm residual seen after any step.
    pub max_pseudo_norm_residual: f64,
}

impl Trajectory {
    pub fn terminated(&self) -> &Termination {
        &self.temporal.terminated
    }
}

/// Simulates the full diffusion (temporal then spatial in lockstep) from the
/// given initial states. Each step consumes one normal draw for the
/// temporal increment followed by the spatial draws.
#[allow(clippy::too_many_arguments)]
pub fn simulate_full<R: Rng + ?Sized>(
    init_temporal: TemporalState,
    init_spatial: SpatialState,
    model: &ExpansionModel,
    fiber: &Fiber,
    p: &StepParams,
    s_max: f64,
    thin: usize,
    rng: &mut R,
) -> Trajectory {
    let mut rec = PathRecorder::new(init_temporal, p.sigma, thin).retaining_capped_steps(p.ds);
    let mut spatial = vec![init_spatial.clone()];
    let mut sp = init_spatial;
    let mut max_c = constraint_residual(&sp, fiber);
    let mut max_pn = init_temporal.pseudo_norm_residual().abs();
    let fail = |s: &TemporalState, reason: String| Termination::NumericalFailure {
        s: s.s,
        t: s.t,
        reason,
    };
    let mut noise = Vec::new();
    let walker = if sp.x.len() == fiber.ambient_dim() && max_c <= 1e-6 {
        Walker::new(sp.clone(), fiber).ok()
    } else {
        None
    };
    let terminated = if let Err(e) = p.validate() {
        fail(&init_temporal, e.to_string())
    } else if let Some(mut walker) = walker {
        loop {
            let prev = *rec.current();
            let next = match advance(&prev.state, model, p, s_max, rng) {
                Advance::Moved(n) => n,
                Advance::Stop(cause) => break cause,
            };
            noise.clear();
            for _ in 0..noise_len(&prev.state, &next, fiber, p) {
                noise.push(rng.sample::<f64, _>(StandardNormal));
            }
            let (cur, kept) = rec.push(next);
            let psi = cur.conformal - prev.conformal;
            let stepped = match &walker {
                Walker::Ambient(a) => step_spatial(a, &prev.state, &next, psi, fiber, p, &noise).map(Walker::Ambient),
                Walker::Chart(c) => step_chart(c, &prev.state, &next, psi, fiber, p, &noise).map(Walker::Chart),
            };
            match stepped {
                Ok(w) => walker = w,
                Err(e) => {
                    if kept {
                        spatial.push(sp.clone());
                    }
                    break fail(&next, e.to_string());
                }
            }
            let state = walker.state();
            if state.x.iter().chain(&state.theta).any(|v| !v.is_finite()) {
                if kept {
                    spatial.push(sp.clone());
                }
                break fail(&next, SpatialError::NonFinite.to_string());
            }
            sp = state;
            max_c = max_c.max(constraint_residual(&sp, fiber));
            max_pn = max_pn.max(next.pseudo_norm_residual().abs());
            if kept {
                spatial.push(sp.clone());
            }
        }
    } else {
        fail(&init_temporal, format!("initial spatial state invalid for {fiber} (residual {max_c})"))
    };
    let (temporal, appended) = rec.finish(terminated);
    if appended {
        spatial.push(sp);
    }
    debug_assert_eq!(temporal.samples.len(), spatial.len());
    Trajectory {
        fiber: *fiber,
        temporal,
        spatial,
        max_constraint_residual: max_c,
        max_pseudo_norm_residual: max_pn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::rng::trajectory_rng;

    #[test]
    fn constraints_hold_on_every_fiber() {
        let m = catalog("sinh", &[]).unwrap();
        let p = StepParams::new(1.0, 3, 1e-3);
        for f in ["r3", "s3", "h3"] {
            let f: Fiber = f.parse().unwrap();
            let tr = simulate_full(
                TemporalState::from_tdot(&m, 0.0, 1.0, 1.2),
                SpatialState::origin(&f),
                &m,
                &f,
                &p,
                5.0,
                50,
                &mut trajectory_rng(2, 0),
            );
            assert_eq!(tr.temporal.terminated, Termination::ProperTimeBudget);
            assert_eq!(tr.temporal.samples.len(), tr.spatial.len());
            assert!(tr.max_constraint_residual < 1e-9, "{f}: {}", tr.max_constraint_residual);
            assert!(tr.max_pseudo_norm_residual < 1e-12);
        }
    }

    #[test]
    fn sphere_without_noise_is_a_harmonic_rotation() {
        let m = catalog("constant", &[]).unwrap();
        let f = Fiber::spherical(3);
        let p = StepParams::new(0.0, 3, 1e-3);
        let v = 0.7;
        let sp0 = SpatialState::origin(&f);
        let tr = simulate_full(
            TemporalState::new(&m, 0.0, 1.0, v),
            sp0.clone(),
            &m,
            &f,
            &p,
            3.0,
            100,
            &mut trajectory_rng(0, 0),
        );
        for (smp, sp) in tr.temporal.samples.iter().zip(&tr.spatial) {
            let a = v * smp.s();
            for k in 0..4 {
                let exact = a.cos() * sp0.x[k] + a.sin() * sp0.theta[k];
                assert!((sp.x[k] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn big_crunch_on_sphere_terminates() {
        let m = catalog("big_crunch_radiation", &[]).unwrap();
        let f = Fiber::spherical(3);
        let p = StepParams::new(1.0, 3, 1e-3);
        let tr = simulate_full(
            TemporalState::from_tdot(&m, 0.0, 1.0, 1.5),
            SpatialState::origin(&f),
            &m,
            &f,
            &p,
            100.0,
            100,
            &mut trajectory_rng(9, 0),
        );
        assert!(matches!(tr.temporal.terminated, Termination::HorizonReached { .. }));
        assert!(tr.max_constraint_residual < 1e-9);
    }
}

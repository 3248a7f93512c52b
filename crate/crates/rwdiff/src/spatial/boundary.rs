//! Limit points of trajectories on the causal boundary.
//!
//! Every estimate is taken over the trailing `tail_fraction` of retained
//! samples; the tail passes the Cauchy test when the spread of the tracked
//! quantity over it (the norm of the per-component ranges, which bounds the
//! largest pairwise distance) stays below `tol_tail`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::horizon::{self, HorizonError};
use crate::expansion::ExpansionModel;
use crate::quadrature::Improper;
use crate::temporal::Termination;

use super::fiber::{dot, norm, FiberKind};
use super::polar::polar_diagnostics;
use super::simulate::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BoundaryPoint {
    FiberPoint { x_inf: Vec<f64> },
    NullDirection { theta_inf: Vec<f64>, delta_inf: f64 },
    GreatCircle { u: Vec<f64>, v: Vec<f64> },
    TimelikeApex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LimitStatus {
    Converged,
    Unconverged { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub point: BoundaryPoint,
    pub status: LimitStatus,
    /// Spread of the tracked quantity over the tail.
    pub tail_deviation: f64,
    pub tail_samples: usize,
    /// Remaining variation ∫_{t_end}^T du/α for fiber-point limits.
    pub certificate: Option<f64>,
}

impl BoundaryReport {
    pub fn converged(&self) -> bool {
        self.status == LimitStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    pub tail_fraction: f64,
    pub tol_tail: f64,
    pub tol_cert: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            tail_fraction: 0.2,
            tol_tail: 1e-2,
            tol_cert: 1e-3,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("trajectory ended in a numerical failure: {0}")]
    FailedTrajectory(String),
    #[error("trajectory has {0} samples; at least 4 are needed")]
    TooShort(usize),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
}

/// Norm of the per-component ranges of a vector sequence.
pub fn spread(vs: &[Vec<f64>]) -> f64 {
    let Some(first) = vs.first() else { return 0.0 };
    (0..first.len())
        .map(|k| {
            let (lo, hi) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v[k]), hi.max(v[k]))
            });
            (hi - lo) * (hi - lo)
        })
        .sum::<f64>()
        .sqrt()
}

/// Range of a scalar sequence.
pub fn scalar_spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut m = vec![0.0; vs[0].len()];
    for v in vs {
        m.iter_mut().zip(v).for_each(|(a, b)| *a += b / n);
    }
    m
}

/// Index of the first tail sample.
pub fn tail_start(n: usize, fraction: f64) -> usize {
    let k = ((fraction * n as f64).ceil() as usize).clamp(2, n);
    n - k
}

/// η_i = ∫ ṫ/α ds along the retained samples, split as the recorded
/// conformal column A_i plus ∫ (ṫ − u)/α ds = ∫ ds/(α(ṫ + u)). The split
/// keeps η consistent with the distance travelled by the spatial scheme.
pub fn conformal_times(traj: &Trajectory) -> Vec<f64> {
    let excess = |st: &crate::temporal::TemporalState| (-st.log_alpha).exp() / (st.tdot() + st.u);
    let samples = &traj.temporal.samples;
    let mut eta = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for (i, smp) in samples.iter().enumerate() {
        if i > 0 {
            let prev = &samples[i - 1];
            acc += 0.5 * (smp.s() - prev.s()) * (excess(&prev.state) + excess(&smp.state));
        }
        eta.push(smp.conformal + acc);
    }
    eta
}

/// Great-circle frame (U_s, V_s) at every retained sample.
pub fn great_circle_frames(traj: &Trajectory) -> Vec<(Vec<f64>, Vec<f64>)> {
    traj.temporal
        .samples
        .iter()
        .zip(&traj.spatial)
        .map(|(smp, sp)| {
            let (s, c) = smp.conformal.sin_cos();
            let u = sp.x.iter().zip(&sp.theta).map(|(x, t)| c * x - s * t).collect();
            let v = sp.x.iter().zip(&sp.theta).map(|(x, t)| s * x + c * t).collect();
            (u, v)
        })
        .collect()
}

/// max |x_s − cos(A_s)U − sin(A_s)V| over the trailing `fraction` of samples.
pub fn great_circle_residual(traj: &Trajectory, u: &[f64], v: &[f64], fraction: f64) -> f64 {
    let n = traj.spatial.len();
    let start = tail_start(n, fraction);
    traj.temporal.samples[start..]
        .iter()
        .zip(&traj.spatial[start..])
        .map(|(smp, sp)| {
            let (s, c) = smp.conformal.sin_cos();
            let d: Vec<f64> = sp
                .x
                .iter()
                .zip(u.iter().zip(v))
                .map(|(x, (a, b))| x - c * a - s * b)
                .collect();
            norm(&d)
        })
        .fold(0.0, f64::max)
}

/// Spread over the tail of the quantity that carries the asymptotic
/// direction: Θ itself when the limit is a fiber point or the fiber is flat,
/// the spatial part of Θ normalized on a hyperbolic fiber, and the frame
/// (U, V) for a great circle.
pub fn direction_spread(traj: &Trajectory, point: &BoundaryPoint, fraction: f64) -> f64 {
    let start = tail_start(traj.spatial.len(), fraction);
    let tail = &traj.spatial[start..];
    match (point, traj.fiber.kind) {
        (BoundaryPoint::GreatCircle { .. }, _) => {
            let frames = great_circle_frames(traj);
            let us: Vec<Vec<f64>> = frames[start..].iter().map(|f| f.0.clone()).collect();
            let vs: Vec<Vec<f64>> = frames[start..].iter().map(|f| f.1.clone()).collect();
            spread(&us).max(spread(&vs))
        }
        (BoundaryPoint::NullDirection { .. }, FiberKind::Hyperbolic) => {
            let dirs: Vec<Vec<f64>> = tail
                .iter()
                .map(|s| {
                    let n = norm(&s.theta[1..]);
                    s.theta[1..].iter().map(|v| v / n).collect()
                })
                .collect();
            spread(&dirs)
        }
        _ => spread(&tail.iter().map(|s| s.theta.clone()).collect::<Vec<_>>()),
    }
}

pub fn boundary_limit(traj: &Trajectory, model: &ExpansionModel) -> Result<BoundaryReport, BoundaryError> {
    boundary_limit_with(traj, model, BoundaryOptions::default())
}

/// Extracts the boundary limit of a terminated trajectory: a fiber point
/// when I₊ < ∞, otherwise a null direction (flat and hyperbolic fibers) or
/// a great circle (spherical fibers).
pub fn boundary_limit_with(
    traj: &Trajectory,
    model: &ExpansionModel,
    opts: BoundaryOptions,
) -> Result<BoundaryReport, BoundaryError> {
    if let Termination::NumericalFailure { reason, .. } = &traj.temporal.terminated {
        return Err(BoundaryError::FailedTrajectory(reason.clone()));
    }
    let n = traj.spatial.len();
    if n < 4 {
        return Err(BoundaryError::TooShort(n));
    }
    let start = tail_start(n, opts.tail_fraction);
    let tail = &traj.spatial[start..];
    let tail_samples = tail.len();
    let unconverged = |what: &str, dev: f64, tol: f64| LimitStatus::Unconverged {
        reason: format!("{what} spread {dev:.3e} over the tail exceeds {tol:.1e}"),
    };
    let c0 = horizon::default_split_point(model);
    if let Improper::Finite { .. } = horizon::remaining_variation(model, c0, 1e-6)? {
        let t_end = traj.temporal.last().t();
        let cert = match horizon::remaining_variation(model, t_end, 1e-6)? {
            Improper::Finite { value } => value,
            _ => f64::INFINITY,
        };
        let xs: Vec<Vec<f64>> = tail.iter().map(|s| s.x.clone()).collect();
        let dev = spread(&xs);
        let status = if cert < opts.tol_cert {
            LimitStatus::Converged
        } else {
            LimitStatus::Unconverged {
                reason: format!("remaining variation {cert:.3e} exceeds {:.1e}", opts.tol_cert),
            }
        };
        return Ok(BoundaryReport {
            point: BoundaryPoint::FiberPoint {
                x_inf: traj.spatial[n - 1].x.clone(),
            },
            status,
            tail_deviation: dev,
            tail_samples,
            certificate: Some(cert),
        });
    }
    match traj.fiber.kind {
        FiberKind::Spherical => {
            let frames = great_circle_frames(traj);
            let us: Vec<Vec<f64>> = frames[start..].iter().map(|f| f.0.clone()).collect();
            let vs: Vec<Vec<f64>> = frames[start..].iter().map(|f| f.1.clone()).collect();
            let dev = spread(&us).max(spread(&vs));
            Ok(BoundaryReport {
                point: BoundaryPoint::GreatCircle {
                    u: mean_vec(&us),
                    v: mean_vec(&vs),
                },
                status: if dev < opts.tol_tail {
                    LimitStatus::Converged
                } else {
                    unconverged("(U, V)", dev, opts.tol_tail)
                },
                tail_deviation: dev,
                tail_samples,
                certificate: None,
            })
        }
        FiberKind::Euclidean => {
            let eta = conformal_times(traj);
            let thetas: Vec<Vec<f64>> = tail.iter().map(|s| s.theta.clone()).collect();
            let m = mean_vec(&thetas);
            let nm = norm(&m);
            let theta_inf: Vec<f64> = m.iter().map(|v| v / nm).collect();
            let deltas: Vec<f64> = tail
                .iter()
                .zip(&eta[start..])
                .map(|(s, e)| e - dot(&s.x, &theta_inf))
                .collect();
            let dev = scalar_spread(&deltas).max(spread(&thetas));
            Ok(BoundaryReport {
                point: BoundaryPoint::NullDirection {
                    theta_inf,
                    delta_inf: *deltas.last().unwrap(),
                },
                status: if dev < opts.tol_tail {
                    LimitStatus::Converged
                } else {
                    unconverged("(delta, theta)", dev, opts.tol_tail)
                },
                tail_deviation: dev,
                tail_samples,
                certificate: None,
            })
        }
        FiberKind::Hyperbolic => {
            let eta = conformal_times(traj);
            let mut dirs = Vec::with_capacity(tail_samples);
            let mut deltas = Vec::with_capacity(tail_samples);
            for (sp, e) in tail.iter().zip(&eta[start..]) {
                match polar_diagnostics(sp, &traj.fiber) {
                    Ok(p) => {
                        deltas.push(e - p.distance());
                        dirs.push(p.direction);
                    }
                    Err(err) => {
                        return Ok(BoundaryReport {
                            point: BoundaryPoint::NullDirection {
                                theta_inf: vec![f64::NAN; traj.fiber.d],
                                delta_inf: f64::NAN,
                            },
                            status: LimitStatus::Unconverged {
                                reason: format!("tail still near the base point: {err}"),
                            },
                            tail_deviation: f64::INFINITY,
                            tail_samples,
                            certificate: None,
                        })
                    }
                }
            }
            let m = mean_vec(&dirs);
            let nm = norm(&m);
            let theta_inf: Vec<f64> = m.iter().map(|v| v / nm).collect();
            let dev = scalar_spread(&deltas).max(spread(&dirs));
            Ok(BoundaryReport {
                point: BoundaryPoint::NullDirection {
                    theta_inf,
                    delta_inf: *deltas.last().unwrap(),
                },
                status: if dev < opts.tol_tail {
                    LimitStatus::Converged
                } else {
                    unconverged("(delta, direction)", dev, opts.tol_tail)
                },
                tail_deviation: dev,
                tail_samples,
                certificate: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::rng::trajectory_rng;
    use crate::spatial::{simulate_full, Fiber, SpatialState};
    use crate::temporal::{StepParams, TemporalState};

    fn run(model: &str, params: &[f64], fiber: &str, s_max: f64, seed: u64) -> (Trajectory, ExpansionModel) {
        let m = catalog(model, params).unwrap();
        let f: Fiber = fiber.parse().unwrap();
        let p = StepParams::new(1.0, f.d, 1e-3);
        let tr = simulate_full(
            TemporalState::from_tdot(&m, 0.0, 1.0, 1.5),
            SpatialState::origin(&f),
            &m,
            &f,
            &p,
            s_max,
            20,
            &mut trajectory_rng(seed, 0),
        );
        (tr, m)
    }

    #[test]
    fn de_sitter_gives_certified_fiber_point() {
        let (tr, m) = run("sinh", &[], "h3", 30.0, 4);
        let rep = boundary_limit(&tr, &m).unwrap();
        assert!(matches!(rep.point, BoundaryPoint::FiberPoint { .. }));
        assert!(rep.converged(), "{rep:?}");
        assert!(rep.certificate.unwrap() < 1e-3);
    }

    #[test]
    fn einstein_static_sphere_gives_orthonormal_frame() {
        let (tr, m) = run("constant", &[], "s3", 40.0, 6);
        let rep = boundary_limit(&tr, &m).unwrap();
        match &rep.point {
            BoundaryPoint::GreatCircle { u, v } => {
                assert!((norm(u) - 1.0).abs() < 1e-3);
                assert!((norm(v) - 1.0).abs() < 1e-3);
                assert!(dot(u, v).abs() < 1e-3);
                assert!(great_circle_residual(&tr, u, v, 0.1) < 1e-2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_static_gives_null_direction() {
        let (tr, m) = run("constant", &[], "r3", 15.0, 8);
        let rep = boundary_limit(&tr, &m).unwrap();
        match &rep.point {
            BoundaryPoint::NullDirection { theta_inf, .. } => assert!((norm(theta_inf) - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(rep.converged(), "{rep:?}");
    }

    #[test]
    fn spreads() {
        assert_eq!(scalar_spread(&[1.0, 3.0, 2.0]), 2.0);
        assert_eq!(spread(&[vec![0.0, 0.0], vec![3.0, 4.0]]), 5.0);
        assert_eq!(tail_start(100, 0.2), 80);
        assert_eq!(tail_start(3, 0.2), 1);
    }
}

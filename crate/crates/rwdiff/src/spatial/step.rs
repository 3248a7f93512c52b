//! Spatial step: an exact geodesic move by the conformal phase increment,
//! followed by an Euler step of the time-changed spherical Brownian motion
//! of the direction Θ in the tangent space at the new point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::temporal::{StepParams, TemporalState};

use super::fiber::{dot, norm, Fiber, FiberKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialState {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("state has {got} components, fiber {fiber} needs {needed}")]
    Dimension { fiber: String, needed: usize, got: usize },
    #[error("direction is degenerate with respect to the position; cannot project")]
    Degenerate,
    #[error("non-finite spatial state")]
    NonFinite,
    #[error("noise vector has {got} draws, {needed} needed")]
    NoiseLength { needed: usize, got: usize },
}

/// Largest per-substep value of g·h before the direction update is split.
pub const MAX_GH_PER_SUBSTEP: f64 = 0.1;
/// Cap on the number of direction substeps in one step.
pub const MAX_SUBSTEPS: usize = 100;

impl SpatialState {
    /// Canonical starting state: base point of the fiber with Θ along the
    /// first tangent axis.
    pub fn origin(fiber: &Fiber) -> Self {
        let n = fiber.ambient_dim();
        let mut x = vec![0.0; n];
        let mut theta = vec![0.0; n];
        match fiber.kind {
            FiberKind::Euclidean => theta[0] = 1.0,
            _ => {
                x[0] = 1.0;
                theta[1] = 1.0;
            }
        }
        SpatialState { x, theta }
    }

    fn check_dim(&self, fiber: &Fiber) -> Result<(), SpatialError> {
        let n = fiber.ambient_dim();
        for v in [&self.x, &self.theta] {
            if v.len() != n {
                return Err(SpatialError::Dimension {
                    fiber: fiber.label(),
                    needed: n,
                    got: v.len(),
                });
            }
        }
        if self.x.iter().chain(&self.theta).any(|v| !v.is_finite()) {
            return Err(SpatialError::NonFinite);
        }
        Ok(())
    }
}

/// Largest scale-relative constraint violation of a state: the manifold
/// equation, the unit norm of Θ and tangency.
pub fn constraint_residual(sp: &SpatialState, fiber: &Fiber) -> f64 {
    let (x, th) = (&sp.x, &sp.theta);
    match fiber.kind {
        FiberKind::Euclidean => (norm(th) - 1.0).abs(),
        FiberKind::Spherical => {
            let rx = (norm(x) - 1.0).abs();
            let rt = (norm(th) - 1.0).abs();
            let rxt = dot(x, th).abs();
            rx.max(rt).max(rxt)
        }
        FiberKind::Hyperbolic => {
            let ex = dot(x, x);
            let et = dot(th, th);
            let rx = (fiber.form(x, x) + 1.0).abs() / ex;
            let rt = (fiber.form(th, th) - 1.0).abs() / et;
            let rxt = fiber.form(x, th).abs() / (ex * et).sqrt();
            let sheet = if x[0] > 0.0 { 0.0 } else { f64::INFINITY };
            rx.max(rt).max(rxt).max(sheet)
        }
    }
}

/// Restores the manifold and tangency constraints.
///
/// Flat: Θ ← Θ/|Θ|. Sphere: x ← x/|x|, then Θ is orthogonalized against x
/// and normalized. Hyperboloid: the spatial parts are kept, x⁰ is recomputed
/// as √(1 + |x_s|²), Θ⁰ from tangency, and Θ is scaled to unit Minkowski
/// norm.
pub fn project_to_manifold(
    x: &[f64],
    theta: &[f64],
    fiber: &Fiber,
) -> Result<(Vec<f64>, Vec<f64>), SpatialError> {
    let sp = SpatialState {
        x: x.to_vec(),
        theta: theta.to_vec(),
    };
    sp.check_dim(fiber)?;
    match fiber.kind {
        FiberKind::Euclidean => {
            let n = norm(theta);
            if !(n > 1e-12) {
                return Err(SpatialError::Degenerate);
            }
            Ok((x.to_vec(), theta.iter().map(|v| v / n).collect()))
        }
        FiberKind::Spherical => {
            let nx = norm(x);
            if !(nx > 0.0) {
                return Err(SpatialError::Degenerate);
            }
            let xp: Vec<f64> = x.iter().map(|v| v / nx).collect();
            let c = dot(theta, &xp);
            let mut tp: Vec<f64> = theta.iter().zip(&xp).map(|(t, xv)| t - c * xv).collect();
            // A second pass removes the rounding left by the first.
            let c2 = dot(&tp, &xp);
            tp.iter_mut().zip(&xp).for_each(|(t, xv)| *t -= c2 * xv);
            let nt = norm(&tp);
            if !(nt > 1e-12 * norm(theta).max(1e-300)) {
                return Err(SpatialError::Degenerate);
            }
            tp.iter_mut().for_each(|t| *t /= nt);
            Ok((xp, tp))
        }
        FiberKind::Hyperbolic => {
            let xs = &x[1..];
            let ts = &theta[1..];
            let r2 = dot(xs, xs);
            let x0 = (1.0 + r2).sqrt();
            let ts2 = dot(ts, ts);
            let wedge2 = wedge_norm2(xs, ts);
            let q = (ts2 + wedge2) / (1.0 + r2);
            if !(q > 0.0) || !(ts2 > 1e-300) {
                return Err(SpatialError::Degenerate);
            }
            let scale = 1.0 / q.sqrt();
            let ts_new: Vec<f64> = ts.iter().map(|v| v * scale).collect();
            let t0 = dot(xs, &ts_new) / x0;
            let mut xp = Vec::with_capacity(x.len());
            xp.push(x0);
            xp.extend_from_slice(xs);
            let mut tp = Vec::with_capacity(x.len());
            tp.push(t0);
            tp.extend(ts_new);
            Ok((xp, tp))
        }
    }
}

/// |a ∧ b|² = |a|²|b|² − ⟨a,b⟩², summed over coordinate planes to avoid
/// cancellation.
fn wedge_norm2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w = a[i] * b[j] - a[j] * b[i];
            s += w * w;
        }
    }
    s
}

/// Moves along the geodesic through x with unit direction Θ by arc length
/// ψ, transporting Θ along.
pub fn geodesic_move(sp: &SpatialState, fiber: &Fiber, psi: f64) -> SpatialState {
    let (x, th) = (&sp.x, &sp.theta);
    match fiber.kind {
        FiberKind::Euclidean => SpatialState {
            x: x.iter().zip(th).map(|(a, b)| a + psi * b).collect(),
            theta: th.clone(),
        },
        FiberKind::Spherical => {
            let (s, c) = psi.sin_cos();
            SpatialState {
                x: x.iter().zip(th).map(|(a, b)| c * a + s * b).collect(),
                theta: x.iter().zip(th).map(|(a, b)| -s * a + c * b).collect(),
            }
        }
        FiberKind::Hyperbolic => {
            let (s, c) = (psi.sinh(), psi.cosh());
            SpatialState {
                x: x.iter().zip(th).map(|(a, b)| c * a + s * b).collect(),
                theta: x.iter().zip(th).map(|(a, b)| s * a + c * b).collect(),
            }
        }
    }
}

/// Applies the noise projector at (x, Θ) to the standard normal draws `xi`
/// (length `ambient_dim`). The result has covariance equal to the sum of
/// eᵢeᵢᵀ over a form-orthonormal basis (eᵢ) of the complement of
/// span{x, Θ} in the tangent space.
pub fn project_noise(sp: &SpatialState, fiber: &Fiber, xi: &[f64]) -> Vec<f64> {
    let (x, th) = (&sp.x, &sp.theta);
    match fiber.kind {
        FiberKind::Euclidean => {
            let c = dot(th, xi);
            xi.iter().zip(th).map(|(z, t)| z - c * t).collect()
        }
        FiberKind::Spherical => {
            let cx = dot(x, xi);
            let ct = dot(th, xi);
            xi.iter()
                .zip(x.iter().zip(th))
                .map(|(z, (a, t))| z - cx * a - ct * t)
                .collect()
        }
        FiberKind::Hyperbolic => {
            // Work in the rest frame of x: the boost B sends (1, 0) to x.
            let x0 = x[0];
            let xs = &x[1..];
            let ts = &th[1..];
            let k = dot(xs, ts) / (x0 * (1.0 + x0));
            let rest: Vec<f64> = ts.iter().zip(xs).map(|(t, a)| t - a * k).collect();
            let rn2 = dot(&rest, &rest);
            let zs = &xi[1..];
            let c = dot(&rest, zs) / rn2;
            let zeta: Vec<f64> = zs.iter().zip(&rest).map(|(z, r)| z - c * r).collect();
            let xz = dot(xs, &zeta);
            let mut out = Vec::with_capacity(x.len());
            out.push(xz);
            out.extend(zeta.iter().zip(xs).map(|(z, a)| z + a * xz / (1.0 + x0)));
            out
        }
    }
}

/// Number of direction substeps for a given g·h.
pub fn substeps(gh: f64) -> usize {
    if !(gh > MAX_GH_PER_SUBSTEP) {
        1
    } else {
        ((gh / MAX_GH_PER_SUBSTEP).ceil() as usize).min(MAX_SUBSTEPS)
    }
}

/// Clock density g = σ²/(ṫ² − 1) at a temporal state (infinite when ṫ = 1).
pub fn clock_density(ts: &TemporalState, sigma: f64) -> f64 {
    if ts.u > 0.0 {
        sigma * sigma / (ts.u * ts.u)
    } else {
        f64::INFINITY
    }
}

/// Number of standard normal draws the step from `before` to `after` will
/// consume.
pub fn noise_len(before: &TemporalState, after: &TemporalState, fiber: &Fiber, p: &StepParams) -> usize {
    let g = clock_density(before, p.sigma);
    if !g.is_finite() || p.sigma == 0.0 {
        return 0;
    }
    substeps(g * (after.s - before.s)) * fiber.ambient_dim()
}

/// Euler step of the direction process with clock increment `gh`:
/// Θ ← Θ(1 − ((d−1)/2)·gh) + √gh·P ξ, followed by projection.
pub fn direction_step(
    sp: &SpatialState,
    fiber: &Fiber,
    gh: f64,
    xi: &[f64],
) -> Result<SpatialState, SpatialError> {
    let damp = 1.0 - 0.5 * (fiber.d as f64 - 1.0) * gh;
    let pn = project_noise(sp, fiber, xi);
    let sq = gh.sqrt();
    let theta: Vec<f64> = sp.theta.iter().zip(&pn).map(|(t, z)| t * damp + sq * z).collect();
    let (x, theta) = project_to_manifold(&sp.x, &theta, fiber)?;
    Ok(SpatialState { x, theta })
}

/// Advances the spatial state over the temporal step `before → after`.
///
/// `psi` is the conformal phase increment ∫ a/α² ds over the step; `noise`
/// must hold [`noise_len`] standard normal draws. When ṫ = 1 at the start
/// of the step the clock density is infinite and only the geodesic move is
/// made.
pub fn step_spatial(
    sp: &SpatialState,
    before: &TemporalState,
    after: &TemporalState,
    psi: f64,
    fiber: &Fiber,
    p: &StepParams,
    noise: &[f64],
) -> Result<SpatialState, SpatialError> {
    sp.check_dim(fiber)?;
    let needed = noise_len(before, after, fiber, p);
    if noise.len() != needed {
        return Err(SpatialError::NoiseLength {
            needed,
            got: noise.len(),
        });
    }
    let moved = geodesic_move(sp, fiber, psi);
    let (x, theta) = project_to_manifold(&moved.x, &moved.theta, fiber)?;
    let mut cur = SpatialState { x, theta };
    if needed == 0 {
        return Ok(cur);
    }
    let h = after.s - before.s;
    let g = clock_density(before, p.sigma);
    let n_sub = needed / fiber.ambient_dim();
    let gh = g * h / n_sub as f64;
    for chunk in noise.chunks(fiber.ambient_dim()) {
        cur = direction_step(&cur, fiber, gh, chunk)?;
    }
    if cur.x.iter().chain(&cur.theta).any(|v| !v.is_finite()) {
        return Err(SpatialError::NonFinite);
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;

    fn fibers() -> [Fiber; 3] {
        [Fiber::euclidean(3), Fiber::spherical(3), Fiber::hyperbolic(3)]
    }

    #[test]
    fn projection_is_idempotent_on_valid_states() {
        for f in fibers() {
            let sp = SpatialState::origin(&f);
            let (x, t) = project_to_manifold(&sp.x, &sp.theta, &f).unwrap();
            assert_eq!((x, t), (sp.x.clone(), sp.theta.clone()));
        }
        let f = Fiber::hyperbolic(3);
        let sp = geodesic_move(&SpatialState::origin(&f), &f, 2.3);
        let (x, t) = project_to_manifold(&sp.x, &sp.theta, &f).unwrap();
        for (a, b) in x.iter().zip(&sp.x).chain(t.iter().zip(&sp.theta)) {
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn sphere_projection_example() {
        let f = Fiber::spherical(3);
        let (x, t) = project_to_manifold(&[1.1, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &f).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(t, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            project_to_manifold(&[1.0, 0.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0], &f),
            Err(SpatialError::Degenerate)
        ));
    }

    #[test]
    fn flat_geodesic_without_noise() {
        let f = Fiber::euclidean(3);
        let m = catalog("constant", &[]).unwrap();
        let p = StepParams::new(0.0, 3, 0.01);
        let b = TemporalState::new(&m, 0.0, 1.0, 1.0);
        let a = TemporalState::new(&m, 0.01, 1.0 + 0.01 * 2f64.sqrt(), 1.0);
        let sp = SpatialState {
            x: vec![1.0, 2.0, 3.0],
            theta: vec![0.6, 0.8, 0.0],
        };
        let out = step_spatial(&sp, &b, &a, 0.01, &f, &p, &[]).unwrap();
        assert_eq!(out.theta, sp.theta);
        assert!((out.x[0] - 1.006).abs() < 1e-15 && (out.x[1] - 2.008).abs() < 1e-15);
    }

    #[test]
    fn flat_direction_step_against_projector_formula() {
        // Θ = (1, 0, 0), gh = 0.01, ξ = (0.3, −1.2, 0.5):
        // P ξ = (0, −1.2, 0.5); Θ' ∝ (1 − 0.01, −0.12, 0.05).
        let f = Fiber::euclidean(3);
        let sp = SpatialState {
            x: vec![0.0; 3],
            theta: vec![1.0, 0.0, 0.0],
        };
        let out = direction_step(&sp, &f, 0.01, &[0.3, -1.2, 0.5]).unwrap();
        let raw = [0.99, -0.12, 0.05];
        let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2] as f64).sqrt();
        for (o, r) in out.theta.iter().zip(raw) {
            assert!((o - r / n).abs() < 1e-15);
        }
    }

    #[test]
    fn hyperbolic_noise_is_tangent_and_orthogonal_to_theta() {
        let f = Fiber::hyperbolic(3);
        let sp = geodesic_move(&SpatialState::origin(&f), &f, 1.7);
        let sp = direction_step(&sp, &f, 0.3, &[0.1, 0.4, -0.7, 1.1]).unwrap();
        let z = project_noise(&sp, &f, &[0.9, -0.2, 0.5, 0.3]);
        assert!(f.form(&z, &sp.x).abs() < 1e-12);
        assert!(f.form(&z, &sp.theta).abs() < 1e-12);
    }

    #[test]
    fn substep_counts() {
        assert_eq!(substeps(0.05), 1);
        assert_eq!(substeps(0.25), 3);
        assert_eq!(substeps(1e9), MAX_SUBSTEPS);
        assert_eq!(substeps(f64::NAN), 1);
    }
}

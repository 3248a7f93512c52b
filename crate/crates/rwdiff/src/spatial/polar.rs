use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fiber::{dot, norm, Fiber, FiberKind};
use super::step::SpatialState;

/// Below this spatial radius the radial/angular split is ill-conditioned.
pub const R_MIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("polar diagnostics are defined on hyperbolic fibers only")]
    NotHyperbolic,
    #[error("radius {0} below the conditioning threshold")]
    TooClose(f64),
}

/// Polar split of a hyperboloid state x = (cosh R, sinh R·ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    /// r = |x_s| = sinh R.
    pub r: f64,
    /// ω = x_s/r.
    pub direction: Vec<f64>,
    /// Radial component of Θ, c/a = Θ⁰/r.
    pub c_over_a: f64,
    /// Norm of the angular part of Θ, ρ/r.
    pub rho_over_r: f64,
}

impl Polar {
    /// Hyperbolic distance R = argsh r from the base point.
    pub fn distance(&self) -> f64 {
        self.r.asinh()
    }
}

pub fn polar_diagnostics(sp: &SpatialState, fiber: &Fiber) -> Result<Polar, PolarError> {
    if fiber.kind != FiberKind::Hyperbolic {
        return Err(PolarError::NotHyperbolic);
    }
    let xs = &sp.x[1..];
    let ts = &sp.theta[1..];
    let r = norm(xs);
    if !(r >= R_MIN) {
        return Err(PolarError::TooClose(r));
    }
    let direction: Vec<f64> = xs.iter().map(|v| v / r).collect();
    let radial = dot(ts, &direction);
    let angular: Vec<f64> = ts.iter().zip(&direction).map(|(t, w)| t - radial * w).collect();
    Ok(Polar {
        r,
        c_over_a: sp.theta[0] / r,
        rho_over_r: norm(&angular),
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::step::{direction_step, geodesic_move};

    #[test]
    fn radial_and_angular_extremes() {
        let f = Fiber::hyperbolic(3);
        let radial = geodesic_move(&SpatialState::origin(&f), &f, 1.3);
        let p = polar_diagnostics(&radial, &f).unwrap();
        assert!((p.c_over_a - 1.0).abs() < 1e-14 && p.rho_over_r < 1e-14);
        let (s, c) = (1.3f64.sinh(), 1.3f64.cosh());
        let angular = SpatialState {
            x: vec![c, s, 0.0, 0.0],
            theta: vec![0.0, 0.0, 1.0, 0.0],
        };
        let p = polar_diagnostics(&angular, &f).unwrap();
        assert_eq!(p.c_over_a, 0.0);
        assert!((p.rho_over_r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pythagorean_identity_on_random_states() {
        let f = Fiber::hyperbolic(3);
        let mut sp = geodesic_move(&SpatialState::origin(&f), &f, 0.4);
        let draws = [[0.3, -1.0, 0.2, 0.8], [1.5, 0.1, -0.6, -0.9], [-0.4, 0.7, 1.9, 0.05]];
        for (k, xi) in draws.iter().enumerate() {
            sp = direction_step(&sp, &f, 0.5, xi).unwrap();
            sp = geodesic_move(&sp, &f, 0.9 + k as f64);
            let p = polar_diagnostics(&sp, &f).unwrap();
            assert!((p.c_over_a.powi(2) + p.rho_over_r.powi(2) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_origin_and_other_fibers() {
        let f = Fiber::hyperbolic(3);
        assert!(polar_diagnostics(&SpatialState::origin(&f), &f).is_err());
        let s = Fiber::spherical(3);
        assert_eq!(polar_diagnostics(&SpatialState::origin(&s), &s), Err(PolarError::NotHyperbolic));
    }
}

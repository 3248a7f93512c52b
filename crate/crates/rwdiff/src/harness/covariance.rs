use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::trajectory_rng;
use crate::spatial::step::{direction_step, geodesic_move, project_noise};
use crate::spatial::{Fiber, FiberKind, SpatialState};

/// Number of equiprobable bins of the Pearson test.
pub const BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub fiber: String,
    pub samples: usize,
    /// Pearson statistic of |Pξ|² against χ²_{d−1}.
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Largest |Ĉ_kl − δ_kl| of the sample covariance in the complement basis.
    pub max_covariance_error: f64,
    /// Largest component of Pξ along x or Θ.
    pub max_normal_component: f64,
}

impl CovarianceReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level && self.max_normal_component < 1e-9
    }
}

/// A generic valid state away from the base point.
pub fn frozen_state(fiber: &Fiber) -> SpatialState {
    let n = fiber.ambient_dim();
    let moved = geodesic_move(&SpatialState::origin(fiber), fiber, 0.8);
    let xi: Vec<f64> = (0..n).map(|k| 0.3 + 0.45 * k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    direction_step(&moved, fiber, 0.4, &xi).expect("generic state")
}

/// Form-orthonormal basis of the complement of span{x, Θ} in the tangent
/// space (of Θ alone for a flat fiber).
pub fn complement_basis(sp: &SpatialState, fiber: &Fiber) -> Vec<Vec<f64>> {
    let n = fiber.ambient_dim();
    let mut constraints: Vec<(Vec<f64>, f64)> = Vec::new();
    match fiber.kind {
        FiberKind::Euclidean => {}
        FiberKind::Spherical => constraints.push((sp.x.clone(), 1.0)),
        FiberKind::Hyperbolic => constraints.push((sp.x.clone(), -1.0)),
    }
    constraints.push((sp.theta.clone(), 1.0));
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for _ in 0..2 {
            let against = constraints.iter().map(|(c, e)| (c, *e)).chain(basis.iter().map(|b| (b, 1.0)));
            for (c, eps) in against {
                let f = fiber.form(&v, c) * eps;
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= f * b);
            }
        }
        let q = fiber.form(&v, &v);
        if q > 1e-6 {
            let s = q.sqrt();
            basis.push(v.into_iter().map(|a| a / s).collect());
        }
        if basis.len() == fiber.d - 1 {
            break;
        }
    }
    basis
}

/// Draws `samples` projected noise vectors at a frozen state and tests
/// that their coordinates in a form-orthonormal complement basis are
/// independent standard normals.
pub fn noise_covariance_test(fiber: &Fiber, samples: usize, seed: u64) -> CovarianceReport {
    let sp = frozen_state(fiber);
    let basis = complement_basis(&sp, fiber);
    let k = basis.len();
    let dof_q = k as f64;
    let reference = ChiSquared::new(dof_q).expect("positive dof");
    let edges: Vec<f64> = (1..BINS).map(|j| reference.inverse_cdf(j as f64 / BINS as f64)).collect();
    let mut counts = vec![0usize; BINS];
    let mut cov = vec![vec![0.0; k]; k];
    let mut max_normal: f64 = 0.0;
    let mut rng = trajectory_rng(seed, 0);
    let n = fiber.ambient_dim();
    for _ in 0..samples {
        let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let pn = project_noise(&sp, fiber, &xi);
        let z: Vec<f64> = basis.iter().map(|b| fiber.form(&pn, b)).collect();
        max_normal = max_normal.max(fiber.form(&pn, &sp.theta).abs());
        if fiber.kind != FiberKind::Euclidean {
            max_normal = max_normal.max(fiber.form(&pn, &sp.x).abs());
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        counts[edges.partition_point(|e| *e <= q)] += 1;
        for a in 0..k {
            for b in 0..k {
                cov[a][b] += z[a] * z[b] / samples as f64;
            }
        }
    }
    let expected = samples as f64 / BINS as f64;
    let chi_square: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = BINS - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(chi_square);
    let max_covariance_error = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| (cov[a][b] - if a == b { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    CovarianceReport {
        fiber: fiber.label(),
        samples,
        chi_square,
        dof,
        p_value,
        max_covariance_error,
        max_normal_component: max_normal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::step::constraint_residual;

    #[test]
    fn basis_is_orthonormal_and_complementary() {
        for f in [Fiber::euclidean(3), Fiber::spherical(4), Fiber::hyperbolic(3)] {
            let sp = frozen_state(&f);
            assert!(constraint_residual(&sp, &f) < 1e-12);
            let b = complement_basis(&sp, &f);
            assert_eq!(b.len(), f.d - 1);
            for (i, u) in b.iter().enumerate() {
                assert!(f.form(u, &sp.theta).abs() < 1e-12);
                for (j, v) in b.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((f.form(u, v) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projected_noise_has_identity_covariance() {
        for f in [Fiber::euclidean(3), Fiber::spherical(3), Fiber::hyperbolic(3)] {
            let r = noise_covariance_test(&f, 20_000, 5);
            assert!(r.max_normal_component < 1e-9, "{r:?}");
            assert!(r.max_covariance_error < 0.05, "{r:?}");
        }
    }
}

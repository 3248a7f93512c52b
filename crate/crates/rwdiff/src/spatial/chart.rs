//! Geodesic polar chart for the hyperboloid.
//!
//! Far from the base point the ambient coordinates of x and Θ grow like
//! cosh R while the rest-frame direction of Θ stays of unit size, so it can
//! no longer be recovered from them. The chart stores the distance R, the
//! radial unit vector n̂ and the rest-frame direction w ∈ S^{d−1} instead,
//! and moves along geodesics with hyperbolic trigonometry in the plane
//! spanned by n̂ and w.

use crate::temporal::{StepParams, TemporalState};

use super::fiber::{dot, norm, Fiber};
use super::step::{clock_density, noise_len, SpatialError, SpatialState};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicChart {
    /// Distance R from the base point.
    pub distance: f64,
    /// Radial unit vector n̂.
    pub radial: Vec<f64>,
    /// Direction w of Θ in the rest frame of x.
    pub rest: Vec<f64>,
}

fn normalized(v: Vec<f64>) -> Result<Vec<f64>, SpatialError> {
    let n = norm(&v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(SpatialError::Degenerate);
    }
    Ok(v.into_iter().map(|a| a / n).collect())
}

impl HyperbolicChart {
    /// Reads a hyperboloid state; accurate while cosh R is moderate.
    pub fn from_state(sp: &SpatialState) -> Result<Self, SpatialError> {
        let x0 = sp.x[0];
        let xs = &sp.x[1..];
        let ts = &sp.theta[1..];
        let k = sp.theta[0] / (1.0 + x0);
        let rest = normalized(ts.iter().zip(xs).map(|(t, a)| t - a * k).collect())?;
        let r = norm(xs);
        let radial = if r > 0.0 { xs.iter().map(|a| a / r).collect() } else { rest.clone() };
        Ok(HyperbolicChart {
            distance: r.asinh(),
            radial,
            rest,
        })
    }

    /// Ambient hyperboloid coordinates of the state.
    pub fn to_state(&self) -> SpatialState {
        let (sh, ch) = (self.distance.sinh(), self.distance.cosh());
        let c = dot(&self.rest, &self.radial);
        let mut x = Vec::with_capacity(self.radial.len() + 1);
        x.push(ch);
        x.extend(self.radial.iter().map(|n| sh * n));
        let mut theta = Vec::with_capacity(x.len());
        theta.push(sh * c);
        theta.extend(self.rest.iter().zip(&self.radial).map(|(w, n)| w + (ch - 1.0) * c * n));
        SpatialState { x, theta }
    }

    /// Moves by arc length ψ along the geodesic with initial direction w.
    pub fn geodesic_move(&self, psi: f64) -> Result<Self, SpatialError> {
        let c = dot(&self.rest, &self.radial).clamp(-1.0, 1.0);
        let tangential: Vec<f64> = self.rest.iter().zip(&self.radial).map(|(w, n)| w - c * n).collect();
        let s = norm(&tangential);
        let e: Vec<f64> = if s > 0.0 {
            tangential.iter().map(|v| v / s).collect()
        } else {
            vec![0.0; self.radial.len()]
        };
        let (sr, cr) = (self.distance.sinh(), self.distance.cosh());
        let (sp, cp) = (psi.sinh(), psi.cosh());
        let along = cp * sr + sp * cr * c;
        let across = sp * s;
        let rho = along.hypot(across);
        if !rho.is_finite() {
            return Err(SpatialError::NonFinite);
        }
        if rho == 0.0 {
            let radial_part = sp * sr + cp * cr * c;
            let rest = normalized(self.radial.iter().zip(&e).map(|(n, ev)| radial_part * n + cp * s * ev).collect())?;
            return Ok(HyperbolicChart {
                distance: 0.0,
                radial: rest.clone(),
                rest,
            });
        }
        let (cb, sb) = (along / rho, across / rho);
        let sin_new = s * sr / rho;
        let cos_new = c * cb + s * sb * cr;
        let h = cos_new.hypot(sin_new);
        let (cn, sn) = (cos_new / h, sin_new / h);
        let radial: Vec<f64> = self.radial.iter().zip(&e).map(|(n, ev)| cb * n + sb * ev).collect();
        let rest: Vec<f64> = self
            .radial
            .iter()
            .zip(&e)
            .map(|(n, ev)| cn * (cb * n + sb * ev) + sn * (cb * ev - sb * n))
            .collect();
        Ok(HyperbolicChart {
            distance: rho.asinh(),
            radial: normalized(radial)?,
            rest: normalized(rest)?,
        })
    }

    /// Euler step of the direction with clock increment `gh`. `xi` holds
    /// d + 1 draws of which the first is unused, matching the ambient step.
    pub fn direction_step(&self, d: usize, gh: f64, xi: &[f64]) -> Result<Self, SpatialError> {
        let z = &xi[1..];
        let damp = 1.0 - 0.5 * (d as f64 - 1.0) * gh;
        let sq = gh.sqrt();
        let cz = dot(&self.rest, z);
        let rest = normalized(
            self.rest
                .iter()
                .zip(z)
                .map(|(w, zv)| w * damp + sq * (zv - cz * w))
                .collect(),
        )?;
        Ok(HyperbolicChart { rest, ..self.clone() })
    }
}

/// Chart counterpart of [`super::step_spatial`], consuming the same draws.
pub fn step_chart(
    chart: &HyperbolicChart,
    before: &TemporalState,
    after: &TemporalState,
    psi: f64,
    fiber: &Fiber,
    p: &StepParams,
    noise: &[f64],
) -> Result<HyperbolicChart, SpatialError> {
    let needed = noise_len(before, after, fiber, p);
    if noise.len() != needed {
        return Err(SpatialError::NoiseLength {
            needed,
            got: noise.len(),
        });
    }
    let mut cur = chart.geodesic_move(psi)?;
    if needed == 0 {
        return Ok(cur);
    }
    let n = fiber.ambient_dim();
    let gh = clock_density(before, p.sigma) * (after.s - before.s) / (needed / n) as f64;
    for chunk in noise.chunks(n) {
        cur = cur.direction_step(fiber.d, gh, chunk)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::step::{constraint_residual, direction_step, geodesic_move, project_to_manifold};
    use crate::spatial::Fiber;

    fn generic() -> SpatialState {
        let f = Fiber::hyperbolic(3);
        let sp = geodesic_move(&SpatialState::origin(&f), &f, 0.7);
        direction_step(&sp, &f, 0.3, &[0.0, 0.4, -0.8, 1.1]).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    #[test]
    fn round_trip() {
        let sp = generic();
        let back = HyperbolicChart::from_state(&sp).unwrap().to_state();
        assert!(close(&back.x, &sp.x, 1e-12) && close(&back.theta, &sp.theta, 1e-12));
    }

    #[test]
    fn moves_match_the_ambient_formulas() {
        let f = Fiber::hyperbolic(3);
        let sp = generic();
        let chart = HyperbolicChart::from_state(&sp).unwrap();
        for psi in [0.0, 0.01, 0.5, 2.0, -1.3] {
            let want = geodesic_move(&sp, &f, psi);
            let got = chart.geodesic_move(psi).unwrap().to_state();
            assert!(close(&got.x, &want.x, 1e-10), "{psi}: {got:?} vs {want:?}");
            assert!(close(&got.theta, &want.theta, 1e-10), "{psi}: {got:?} vs {want:?}");
        }
        let xi = [0.3, -0.2, 0.9, 0.5];
        let want = direction_step(&sp, &f, 0.05, &xi).unwrap();
        let got = chart.direction_step(3, 0.05, &xi).unwrap().to_state();
        assert!(close(&got.x, &want.x, 1e-12) && close(&got.theta, &want.theta, 1e-10));
    }

    #[test]
    fn starts_at_the_base_point() {
        let f = Fiber::hyperbolic(3);
        let o = SpatialState::origin(&f);
        let chart = HyperbolicChart::from_state(&o).unwrap();
        assert_eq!(chart.distance, 0.0);
        let moved = chart.geodesic_move(1.5).unwrap().to_state();
        let want = geodesic_move(&o, &f, 1.5);
        assert!(close(&moved.x, &want.x, 1e-12) && close(&moved.theta, &want.theta, 1e-12));
    }

    #[test]
    fn stays_accurate_far_out() {
        let f = Fiber::hyperbolic(3);
        let mut chart = HyperbolicChart::from_state(&generic()).unwrap();
        chart = chart.geodesic_move(90.0).unwrap();
        let tilted = chart.direction_step(3, 0.2, &[0.0, 0.5, -1.0, 0.7]).unwrap();
        let c = dot(&tilted.rest, &tilted.radial);
        let sp = tilted.to_state();
        assert!(constraint_residual(&sp, &f) < 1e-12);
        assert!((sp.theta[0] / norm(&sp.x[1..]) - c).abs() < 1e-12);
        let (x, th) = project_to_manifold(&sp.x, &sp.theta, &f).unwrap();
        assert!(x.iter().chain(&th).all(|v| v.is_finite()));
        let back = tilted.geodesic_move(0.0).unwrap();
        assert!((back.distance - tilted.distance).abs() < 1e-12);
    }
}

//! Invariant law ν_{H,σ} of ṫ for a constant Hubble rate H > 0, with
//! density proportional to (x² − 1)^{d/2−1} e^{−2Hx/σ²} on (1, ∞).

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::quadrature::{self, Improper, TailEnd, TailOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("invalid invariant-law parameters: {0}")]
    InvalidParams(String),
    #[error("normalization quadrature failed: {0}")]
    Quadrature(String),
    #[error("rejection sampler exceeded {0} proposals")]
    SamplerExhausted(usize),
}

fn check(h: f64, sigma: f64, d: usize) -> Result<(), InvariantError> {
    if !(h > 0.0 && h.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) || d < 3 {
        return Err(InvariantError::InvalidParams(format!("H = {h}, sigma = {sigma}, d = {d}")));
    }
    Ok(())
}

/// Unnormalized density (x² − 1)^{d/2−1} e^{−2Hx/σ²}; zero for x ≤ 1.
pub fn unnormalized_density(h: f64, sigma: f64, d: usize, x: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    let k = 0.5 * d as f64 - 1.0;
    ((x - 1.0) * (x + 1.0)).powf(k) * (-2.0 * h * x / (sigma * sigma)).exp()
}

/// ν_{H,σ} with a precomputed CDF table.
#[derive(Debug, Clone)]
pub struct InvariantMeasure {
    pub h: f64,
    pub sigma: f64,
    pub d: usize,
    /// Normalizing constant Z = ∫₁^∞ unnormalized.
    pub z: f64,
    /// Table nodes x_i = 1 + y_i², y uniform, with CDF values.
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

const TABLE_NODES: usize = 4000;

impl InvariantMeasure {
    pub fn new(h: f64, sigma: f64, d: usize) -> Result<Self, InvariantError> {
        check(h, sigma, d)?;
        let f = |x: f64| unnormalized_density(h, sigma, d, x);
        let lambda = 2.0 * h / (sigma * sigma);
        let k = 0.5 * d as f64 - 1.0;
        let log_f = |x: f64| k * ((x - 1.0) * (x + 1.0)).ln() - lambda * x;
        let mode = (k + k.hypot(lambda)) / lambda;
        // Beyond x_max the density is below e^{-45} of its peak.
        let mut x_max = mode + 1.0 / lambda;
        while log_f(x_max) > log_f(mode) - 45.0 {
            x_max = 1.0 + 2.0 * (x_max - 1.0);
        }
        let y_max = (x_max - 1.0).sqrt();
        let mut xs = Vec::with_capacity(TABLE_NODES + 1);
        let mut cum = Vec::with_capacity(TABLE_NODES + 1);
        xs.push(1.0);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 1..=TABLE_NODES {
            let y0 = y_max * (i - 1) as f64 / TABLE_NODES as f64;
            let y1 = y_max * i as f64 / TABLE_NODES as f64;
            // Substituting x = 1 + y² removes the square-root edge at x = 1.
            let g = |y: f64| 2.0 * y * f(1.0 + y * y);
            let piece = quadrature::integrate(g, y0, y1, 1e-300, 1e-10)
                .map_err(|e| InvariantError::Quadrature(e.to_string()))?;
            acc += piece.value;
            xs.push(1.0 + y1 * y1);
            cum.push(acc);
        }
        let tail = quadrature::improper_tail(&f, x_max, TailEnd::Infinity, 1e-12, TailOptions::default())
            .map_err(|e| InvariantError::Quadrature(e.to_string()))?;
        let tail = match tail {
            Improper::Finite { value } => value,
            other => return Err(InvariantError::Quadrature(format!("tail verdict {other:?}"))),
        };
        let z = acc + tail;
        let cdf = cum.into_iter().map(|c| c / z).collect();
        Ok(InvariantMeasure {
            h,
            sigma,
            d,
            z,
            xs,
            cdf,
        })
    }

    pub fn unnormalized(&self, x: f64) -> f64 {
        unnormalized_density(self.h, self.sigma, self.d, x)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.unnormalized(x) / self.z
    }

    /// CDF by linear interpolation on the table (exact at the nodes up to
    /// quadrature error).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return 0.0;
        }
        let last = *self.xs.last().unwrap();
        if x >= last {
            return 1.0;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    /// ∫ φ dν by quadrature in the y = √(x − 1) variable.
    pub fn expectation(&self, phi: impl Fn(f64) -> f64) -> Result<f64, InvariantError> {
        let g = |y: f64| {
            let x = 1.0 + y * y;
            2.0 * y * self.unnormalized(x) * phi(x)
        };
        let y_max = (*self.xs.last().unwrap() - 1.0).sqrt();
        let mut total = 0.0;
        let pieces = 64;
        for i in 0..pieces {
            let a = y_max * i as f64 / pieces as f64;
            let b = y_max * (i + 1) as f64 / pieces as f64;
            total += quadrature::integrate(g, a, b, 1e-300, 1e-10)
                .map_err(|e| InvariantError::Quadrature(e.to_string()))?
                .value;
        }
        Ok(total / self.z)
    }

    pub fn mean(&self) -> Result<f64, InvariantError> {
        self.expectation(|x| x)
    }
}

/// Unnormalized and normalized density at x.
pub fn invariant_density(h: f64, sigma: f64, d: usize, x: f64) -> Result<(f64, f64), InvariantError> {
    let m = InvariantMeasure::new(h, sigma, d)?;
    let u = m.unnormalized(x);
    Ok((u, u / m.z))
}

const MAX_PROPOSALS: usize = 100_000;

/// Exact draw from ν_{H,σ} by rejection from 1 + Gamma(d/2, rate λ/2),
/// λ = 2H/σ².
pub fn sample_invariant<R: Rng + ?Sized>(
    h: f64,
    sigma: f64,
    d: usize,
    rng: &mut R,
) -> Result<f64, InvariantError> {
    check(h, sigma, d)?;
    let lambda = 2.0 * h / (sigma * sigma);
    let k = 0.5 * d as f64 - 1.0;
    let rate = 0.5 * lambda;
    let gamma = Gamma::new(k + 1.0, 1.0 / rate)
        .map_err(|e| InvariantError::InvalidParams(e.to_string()))?;
    // Target/proposal ∝ (y + 2)^k e^{−(λ − rate) y}; its log-maximum:
    let excess = lambda - rate;
    let y_star = (k / excess - 2.0).max(0.0);
    let log_m = k * (y_star + 2.0).ln() - excess * y_star;
    for _ in 0..MAX_PROPOSALS {
        let y: f64 = gamma.sample(rng);
        if !(y > 0.0) {
            continue;
        }
        let log_ratio = k * (y + 2.0).ln() - excess * y - log_m;
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            return Ok(1.0 + y);
        }
    }
    Err(InvariantError::SamplerExhausted(MAX_PROPOSALS))
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::temporal::TemporalPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no samples after burn-in {burn_in} (path ends at s = {end})")]
    EmptyWindow { burn_in: f64, end: f64 },
    #[error("level must exceed 1, got {0}")]
    BadLevel(f64),
}

/// Weighted empirical distribution; weights need not be normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Weighted {
    pub fn unweighted(values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        Weighted { values, weights }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean of f over the distribution.
    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        let w = self.total_weight();
        self.values.iter().zip(&self.weights).map(|(v, q)| q * f(*v)).sum::<f64>() / w
    }

    /// Normalized masses in the bins `[edges[k], edges[k+1])`; mass outside
    /// the edges is dropped.
    pub fn histogram(&self, edges: &[f64]) -> Vec<f64> {
        let w = self.total_weight();
        let mut h = vec![0.0; edges.len().saturating_sub(1)];
        for (v, q) in self.values.iter().zip(&self.weights) {
            let k = edges.partition_point(|e| e <= v);
            if k >= 1 && k < edges.len() {
                h[k - 1] += q / w;
            }
        }
        h
    }

    /// Weighted quantiles at the given increasing levels in (0, 1).
    pub fn quantiles(&self, levels: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        let total = self.total_weight();
        let mut out = Vec::with_capacity(levels.len());
        let mut acc = 0.0;
        let mut k = 0;
        for &level in levels {
            while k < idx.len() && acc + self.weights[idx[k]] < level * total {
                acc += self.weights[idx[k]];
                k += 1;
            }
            out.push(self.values[idx[k.min(idx.len() - 1)]]);
        }
        out
    }

    pub fn extend(&mut self, other: &Weighted) {
        self.values.extend_from_slice(&other.values);
        self.weights.extend_from_slice(&other.weights);
    }
}

/// Time-weighted occupation of ṫ over [burn_in, end]: each retained sample
/// carries the proper time until the next one.
pub fn occupation_measure(path: &TemporalPath, burn_in: f64) -> Result<Weighted, StatsError> {
    let smp = &path.samples;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for w in smp.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.s() <= burn_in {
            continue;
        }
        let dt = b.s() - a.s().max(burn_in);
        if dt > 0.0 {
            values.push(a.tdot());
            weights.push(dt);
        }
    }
    if values.is_empty() {
        return Err(StatsError::EmptyWindow {
            burn_in,
            end: path.last().s(),
        });
    }
    Ok(Weighted { values, weights })
}

/// Sup-norm distance between the weighted empirical CDF and `cdf`.
///
/// Both one-sided gaps are checked at every atom, so point masses are
/// handled exactly.
pub fn ks_distance(sample: &Weighted, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut idx: Vec<usize> = (0..sample.values.len()).collect();
    idx.sort_by(|&i, &j| sample.values[i].total_cmp(&sample.values[j]));
    let total = sample.total_weight();
    let mut acc = 0.0;
    let mut d: f64 = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let v = sample.values[idx[k]];
        let below = acc / total;
        while k < idx.len() && sample.values[idx[k]] == v {
            acc += sample.weights[idx[k]];
            k += 1;
        }
        let f = cdf(v);
        d = d.max((f - below).abs()).max((acc / total - f).abs());
    }
    d.min(1.0)
}

/// Number of down-crossings of ṫ through `level` after `burn_in`.
pub fn return_count(path: &TemporalPath, level: f64, burn_in: f64) -> Result<usize, StatsError> {
    Ok(return_counts(path, level, burn_in, &[f64::INFINITY])?[0])
}

/// Cumulative down-crossing counts up to each of the `horizons`.
pub fn return_counts(
    path: &TemporalPath,
    level: f64,
    burn_in: f64,
    horizons: &[f64],
) -> Result<Vec<usize>, StatsError> {
    if !(level > 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let mut counts = vec![0; horizons.len()];
    for w in path.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.s() <= burn_in || !(a.tdot() >= level && b.tdot() < level) {
            continue;
        }
        for (c, h) in counts.iter_mut().zip(horizons) {
            if b.s() <= *h {
                *c += 1;
            }
        }
    }
    Ok(counts)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, f64::NAN);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::temporal::path::{PathRecorder, Termination};
    use crate::temporal::TemporalState;

    fn path_of(tdots: &[f64]) -> TemporalPath {
        let m = catalog("constant", &[]).unwrap();
        let mut rec = PathRecorder::new(TemporalState::from_tdot(&m, 0.0, 1.0, tdots[0]), 1.0, 1);
        for (k, v) in tdots.iter().enumerate().skip(1) {
            rec.push(TemporalState::from_tdot(&m, k as f64, 1.0 + k as f64, *v));
        }
        rec.finish(Termination::ProperTimeBudget).0
    }

    fn exp_cdf(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x).exp()
        }
    }

    #[test]
    fn point_mass_distance() {
        let w = Weighted::unweighted(vec![0.7; 5]);
        let f = exp_cdf(0.7);
        assert!((ks_distance(&w, exp_cdf) - f.max(1.0 - f)).abs() < 1e-15);
    }

    #[test]
    fn constant_path_occupation_is_a_point_mass() {
        let p = path_of(&[3.0; 11]);
        let occ = occupation_measure(&p, 2.5).unwrap();
        assert!(occ.values.iter().all(|&v| (v - 3.0).abs() < 1e-12));
        assert!((occ.total_weight() - 7.5).abs() < 1e-12);
        let h = occ.histogram(&[0.0, 2.0, 4.0]);
        assert!(h[0] == 0.0 && (h[1] - 1.0).abs() < 1e-15);
        assert!(occupation_measure(&p, 20.0).is_err());
    }

    #[test]
    fn ks_of_exact_quantiles() {
        let n = 1000;
        let q: Vec<f64> = (0..n).map(|k| -(1.0 - (k as f64 + 0.5) / n as f64).ln()).collect();
        let d = ks_distance(&Weighted::unweighted(q), exp_cdf);
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn weighted_quantiles() {
        let w = Weighted {
            values: vec![3.0, 1.0, 2.0],
            weights: vec![1.0, 1.0, 2.0],
        };
        assert_eq!(w.quantiles(&[0.1, 0.3, 0.5, 0.8]), vec![1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn returns() {
        assert_eq!(return_count(&path_of(&[1.5, 2.0, 3.0, 4.0]), 2.0, 0.0).unwrap(), 0);
        let p = path_of(&[3.0, 1.5, 3.0, 1.2, 2.5, 1.9]);
        assert_eq!(return_count(&p, 2.0, 0.0).unwrap(), 3);
        assert_eq!(return_count(&p, 2.0, 1.5).unwrap(), 2);
        assert_eq!(return_counts(&p, 2.0, 0.0, &[1.0, 3.0, 5.0]).unwrap(), vec![1, 2, 3]);
        assert!(return_count(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}

//! Monotone cubic (Fritsch–Carlson) interpolation of tabulated α samples.
//!
//! Between samples the interpolant is monotone, hence bounded by the two
//! neighbouring (positive) samples. Outside the table the logarithm is
//! continued linearly with the end slope, so H stays constant there.

/// Minimum number of samples for a tabulated model.
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    ts: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    pub fn new(ts: &[f64], ys: &[f64]) -> Result<Self, String> {
        if ts.len() != ys.len() {
            return Err("time and value columns differ in length".into());
        }
        if ts.len() < MIN_SAMPLES {
            return Err(format!("need at least {MIN_SAMPLES} samples, got {}", ts.len()));
        }
        if ts[0] <= 0.0 || ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("times must be positive and strictly increasing".into());
        }
        if ys.iter().any(|y| !(*y > 0.0) || !y.is_finite()) {
            return Err("values must be finite and strictly positive".into());
        }
        let n = ts.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (ts[i + 1] - ts[i]))
            .collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                0.5 * (delta[i - 1] + delta[i])
            };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * delta[i];
                m[i + 1] = tau * b * delta[i];
            }
        }
        Ok(Table {
            ts: ts.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        })
    }

    /// Flattened `t_0, α_0, t_1, α_1, …` representation.
    pub fn interleaved(&self) -> Vec<f64> {
        self.ts.iter().zip(&self.ys).flat_map(|(t, y)| [*t, *y]).collect()
    }

    fn segment(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.ts.len() - 2),
        }
    }

    /// Value and derivative of the Hermite cubic on the segment containing t.
    fn hermite(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let h = self.ts[i + 1] - self.ts[i];
        let u = (t - self.ts[i]) / h;
        let (y0, y1, m0, m1) = (self.ys[i], self.ys[i + 1], self.slopes[i], self.slopes[i + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * h * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * h * m1;
        let dv = (6.0 * u2 - 6.0 * u) * y0 / h
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * y1 / h
            + (3.0 * u2 - 2.0 * u) * m1;
        (v, dv)
    }

    fn end_log_slope(&self, first: bool) -> f64 {
        let n = self.ts.len();
        if first {
            self.slopes[0] / self.ys[0]
        } else {
            self.slopes[n - 1] / self.ys[n - 1]
        }
    }

    pub fn log_value(&self, t: f64) -> f64 {
        let (t0, tn) = (self.ts[0], *self.ts.last().unwrap());
        if t < t0 {
            self.ys[0].ln() + self.end_log_slope(true) * (t - t0)
        } else if t > tn {
            self.ys.last().unwrap().ln() + self.end_log_slope(false) * (t - tn)
        } else {
            self.hermite(t).0.ln()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.log_value(t).exp()
    }

    /// d/dt log α.
    pub fn log_derivative(&self, t: f64) -> f64 {
        let (t0, tn) = (self.ts[0], *self.ts.last().unwrap());
        if t < t0 {
            self.end_log_slope(true)
        } else if t > tn {
            self.end_log_slope(false)
        } else {
            let (v, dv) = self.hermite(t);
            dv / v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_samples_and_stays_positive() {
        let ts: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 + (t * 1.3).sin().abs() * 5.0).collect();
        let tab = Table::new(&ts, &ys).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((tab.value(*t) - y).abs() < 1e-12 * y);
        }
        for k in 0..900 {
            let t = 1.0 + 0.01 * k as f64;
            assert!(tab.value(t) > 0.0);
        }
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let ts: Vec<f64> = (1..=9).map(|k| k as f64).collect();
        let ys = vec![1.0, 1.1, 1.15, 3.0, 3.01, 7.0, 7.0, 8.0, 20.0];
        let tab = Table::new(&ts, &ys).unwrap();
        let mut prev = 0.0;
        for k in 0..=800 {
            let v = tab.value(1.0 + 0.01 * k as f64);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn rejects_short_or_nonpositive_tables() {
        assert!(Table::new(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        let ts: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let mut ys = vec![1.0; 8];
        ys[3] = 0.0;
        assert!(Table::new(&ts, &ys).is_err());
    }
}

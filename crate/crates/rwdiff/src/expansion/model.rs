use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature;

use super::tabulated::Table;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameters for `{family}`: {reason}")]
    InvalidParams { family: String, reason: String },
    #[error("tabulated model: {0}")]
    Table(String),
    #[error("t = {t} lies outside the time interval (0, {t_end})")]
    Domain { t: f64, t_end: f64 },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied analytic model given by closures.
#[derive(Clone)]
pub struct CustomFns {
    pub name: String,
    pub log_alpha: ScalarFn,
    pub hubble: ScalarFn,
    pub hubble_prime: Option<ScalarFn>,
}

impl fmt::Debug for CustomFns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFns").field("name", &self.name).finish()
    }
}

/// The concrete expansion function.
#[derive(Debug, Clone)]
pub enum Family {
    /// α ≡ value.
    Constant { value: f64 },
    /// α = exp(h·t), constant Hubble function.
    Exponential { h: f64 },
    /// α = t^c.
    Power { c: f64 },
    /// α = t^γ exp(t^β).
    PowerExp { gamma: f64, beta: f64 },
    /// α = sinh t.
    Sinh,
    /// α = √(t(2 − t)) on (0, 2).
    BigCrunchRadiation,
    /// α = Σ p_k t^k with nonnegative coefficients.
    Polynomial { coeffs: Vec<f64> },
    /// Monotone cubic interpolation of positive samples.
    Tabulated(Table),
    Custom(CustomFns),
}

/// Serializable description of a model, used in configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: String,
    pub params: Vec<f64>,
    /// Right endpoint of the time interval; `None` means `+∞`.
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
}

/// Expansion function α on (0, T) together with its logarithmic derivatives.
#[derive(Debug, Clone)]
pub struct ExpansionModel {
    family: Family,
    t_end: f64,
}

/// Central finite-difference step used when no closed-form H' exists.
pub fn fd_step(t: f64) -> f64 {
    (1e-6f64).max(1e-6 * t)
}

fn invalid(family: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParams {
        family: family.to_string(),
        reason: reason.into(),
    }
}

fn log_sinh(t: f64) -> f64 {
    if t > 20.0 {
        t - std::f64::consts::LN_2 + (-(-2.0 * t).exp()).ln_1p()
    } else {
        t.sinh().ln()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.filter(|x| *x > f64::NEG_INFINITY).collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Catalog families by name, with their parameter conventions.
pub const CATALOG_NAMES: [&str; 8] = [
    "constant",
    "exponential",
    "power",
    "power_exp",
    "sinh",
    "big_crunch_radiation",
    "poly",
    "tabulated",
];

/// Builds a catalog model.
///
/// | name | params |
/// |------|--------|
/// | `constant` | `[]` or `[value]` |
/// | `exponential` | `[H]` |
/// | `power` | `[c]` |
/// | `power_exp` | `[gamma, beta]`, β ∈ (0,1) |
/// | `sinh` | `[]` |
/// | `big_crunch_radiation` | `[]` |
/// | `poly` | coefficients `p_0, p_1, …` of α = Σ p_k t^k |
/// | `tabulated` (alias `custom-tabulated`) | `t_0, α_0, t_1, α_1, …` |
pub fn catalog(name: &str, params: &[f64]) -> Result<ExpansionModel, ModelError> {
    let finite_params = params.iter().all(|p| p.is_finite());
    if !finite_params {
        return Err(invalid(name, "parameters must be finite"));
    }
    let inf = f64::INFINITY;
    let family = match name {
        "constant" => {
            let value = match params {
                [] => 1.0,
                [v] if *v > 0.0 => *v,
                _ => return Err(invalid(name, "expects at most one positive value")),
            };
            Family::Constant { value }
        }
        "exponential" => match params {
            [h] if *h >= 0.0 => Family::Exponential { h: *h },
            _ => return Err(invalid(name, "expects one nonnegative rate H")),
        },
        "power" => match params {
            [c] if *c >= 0.0 => Family::Power { c: *c },
            _ => return Err(invalid(name, "expects one nonnegative exponent c")),
        },
        "power_exp" => match params {
            [g, b] if *g >= 0.0 && *b > 0.0 && *b < 1.0 => Family::PowerExp { gamma: *g, beta: *b },
            _ => return Err(invalid(name, "expects gamma >= 0 and beta in (0,1)")),
        },
        "sinh" if params.is_empty() => Family::Sinh,
        "big_crunch_radiation" if params.is_empty() => {
            return Ok(ExpansionModel {
                family: Family::BigCrunchRadiation,
                t_end: 2.0,
            })
        }
        "sinh" | "big_crunch_radiation" => return Err(invalid(name, "takes no parameters")),
        "poly" => {
            if params.is_empty() || params.iter().any(|p| *p < 0.0) || params.iter().all(|p| *p == 0.0)
            {
                return Err(invalid(name, "expects nonnegative coefficients, not all zero"));
            }
            Family::Polynomial { coeffs: params.to_vec() }
        }
        "tabulated" | "custom-tabulated" => {
            if params.len() % 2 != 0 {
                return Err(invalid(name, "expects (t, alpha) pairs"));
            }
            let ts: Vec<f64> = params.iter().step_by(2).cloned().collect();
            let al: Vec<f64> = params.iter().skip(1).step_by(2).cloned().collect();
            return ExpansionModel::tabulated(&ts, &al, None);
        }
        other => return Err(ModelError::UnknownFamily(other.to_string())),
    };
    Ok(ExpansionModel { family, t_end: inf })
}

impl ExpansionModel {
    /// Tabulated model from strictly increasing times and positive values.
    /// `t_end = None` means the model lives on (0, +∞) and is extended
    /// beyond the table log-linearly.
    pub fn tabulated(ts: &[f64], alphas: &[f64], t_end: Option<f64>) -> Result<Self, ModelError> {
        let table = Table::new(ts, alphas).map_err(ModelError::Table)?;
        let t_end = t_end.unwrap_or(f64::INFINITY);
        if t_end <= *ts.last().expect("validated table") && t_end.is_finite() {
            return Err(ModelError::Table("T must exceed the last sample time".into()));
        }
        Ok(ExpansionModel {
            family: Family::Tabulated(table),
            t_end,
        })
    }

    /// Model defined by closures for log α, H and optionally H'.
    pub fn custom(
        name: &str,
        t_end: Option<f64>,
        log_alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        hubble: impl Fn(f64) -> f64 + Send + Sync + 'static,
        hubble_prime: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        ExpansionModel {
            family: Family::Custom(CustomFns {
                name: name.to_string(),
                log_alpha: Arc::new(log_alpha),
                hubble: Arc::new(hubble),
                hubble_prime: hubble_prime.map(Arc::from),
            }),
            t_end: t_end.unwrap_or(f64::INFINITY),
        }
    }

    /// Constant-H model α = exp(H t), used for frozen comparison processes.
    pub fn exponential(h: f64) -> Self {
        ExpansionModel {
            family: Family::Exponential { h },
            t_end: f64::INFINITY,
        }
    }

    /// Rebuilds a model from its serializable description.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ModelError> {
        let mut m = catalog(&spec.family, &spec.params)?;
        if let Some(t) = spec.t_end {
            match &m.family {
                Family::Tabulated(_) if t.is_finite() => m.t_end = t,
                _ if t == m.t_end => {}
                _ if !t.is_finite() && !m.t_end.is_finite() => {}
                _ => return Err(invalid(&spec.family, "T is fixed by the family")),
            }
        }
        Ok(m)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Right endpoint T (possibly `+∞`).
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn has_finite_horizon(&self) -> bool {
        self.t_end.is_finite()
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Constant { .. } => "constant".into(),
            Family::Exponential { .. } => "exponential".into(),
            Family::Power { .. } => "power".into(),
            Family::PowerExp { .. } => "power_exp".into(),
            Family::Sinh => "sinh".into(),
            Family::BigCrunchRadiation => "big_crunch_radiation".into(),
            Family::Polynomial { .. } => "poly".into(),
            Family::Tabulated(_) => "tabulated".into(),
            Family::Custom(c) => c.name.clone(),
        }
    }

    /// Serializable description. Custom closure models report their name
    /// with no parameters and cannot be rebuilt from it.
    pub fn spec(&self) -> ModelSpec {
        let params = match &self.family {
            Family::Constant { value } => vec![*value],
            Family::Exponential { h } => vec![*h],
            Family::Power { c } => vec![*c],
            Family::PowerExp { gamma, beta } => vec![*gamma, *beta],
            Family::Sinh | Family::BigCrunchRadiation | Family::Custom(_) => vec![],
            Family::Polynomial { coeffs } => coeffs.clone(),
            Family::Tabulated(t) => t.interleaved(),
        };
        ModelSpec {
            family: self.name(),
            params,
            t_end: self.t_end.is_finite().then_some(self.t_end),
        }
    }

    pub fn in_domain(&self, t: f64) -> bool {
        t > 0.0 && t < self.t_end
    }

    pub fn check_domain(&self, t: f64) -> Result<(), ModelError> {
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(ModelError::Domain { t, t_end: self.t_end })
        }
    }

    /// log α(t). Never overflows for the analytic families.
    pub fn log_alpha(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { value } => value.ln(),
            Family::Exponential { h } => h * t,
            Family::Power { c } => {
                if *c == 0.0 {
                    0.0
                } else {
                    c * t.ln()
                }
            }
            Family::PowerExp { gamma, beta } => {
                let g = if *gamma == 0.0 { 0.0 } else { gamma * t.ln() };
                g + t.powf(*beta)
            }
            Family::Sinh => log_sinh(t),
            Family::BigCrunchRadiation => 0.5 * (t * (2.0 - t)).ln(),
            Family::Polynomial { coeffs } => {
                let lt = t.ln();
                log_sum_exp(
                    coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(k, p)| p.ln() + k as f64 * lt),
                )
            }
            Family::Tabulated(tab) => tab.log_value(t),
            Family::Custom(c) => (c.log_alpha)(t),
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { value } => *value,
            Family::Power { c } => t.powf(*c),
            Family::BigCrunchRadiation => (t * (2.0 - t)).sqrt(),
            Family::Sinh if t <= 20.0 => t.sinh(),
            Family::Polynomial { coeffs } => horner(coeffs, t),
            Family::Tabulated(tab) => tab.value(t),
            _ => self.log_alpha(t).exp(),
        }
    }

    /// Hubble function H = α'/α.
    pub fn hubble(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } => 0.0,
            Family::Exponential { h } => *h,
            Family::Power { c } => c / t,
            Family::PowerExp { gamma, beta } => gamma / t + beta * t.powf(beta - 1.0),
            Family::Sinh => 1.0 / t.tanh(),
            Family::BigCrunchRadiation => (1.0 - t) / (t * (2.0 - t)),
            Family::Polynomial { coeffs } => poly_ratio(coeffs, t, 1),
            Family::Tabulated(tab) => tab.log_derivative(t),
            Family::Custom(c) => (c.hubble)(t),
        }
    }

    /// H'(t): closed form where available, otherwise a central difference
    /// with step [`fd_step`].
    pub fn hubble_prime(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { .. } | Family::Exponential { .. } => 0.0,
            Family::Power { c } => -c / (t * t),
            Family::PowerExp { gamma, beta } => {
                -gamma / (t * t) + beta * (beta - 1.0) * t.powf(beta - 2.0)
            }
            Family::Sinh => {
                let s = t.sinh();
                if s.is_finite() {
                    -1.0 / (s * s)
                } else {
                    0.0
                }
            }
            Family::BigCrunchRadiation => {
                let u = t * (2.0 - t);
                -(1.0 + (1.0 - t) * (1.0 - t)) / (u * u)
            }
            Family::Polynomial { coeffs } => {
                let h = poly_ratio(coeffs, t, 1);
                poly_ratio(coeffs, t, 2) - h * h
            }
            Family::Custom(CustomFns {
                hubble_prime: Some(hp),
                ..
            }) => hp(t),
            _ => self.hubble_prime_fd(t),
        }
    }

    /// Central-difference H', kept separate so closed forms can be tested
    /// against it.
    pub fn hubble_prime_fd(&self, t: f64) -> f64 {
        let mut h = fd_step(t);
        h = h.min(0.5 * t);
        if self.t_end.is_finite() {
            h = h.min(0.5 * (self.t_end - t));
        }
        (self.hubble(t + h) - self.hubble(t - h)) / (2.0 * h)
    }

    /// α''/α = H' + H².
    pub fn alpha_second_over_alpha(&self, t: f64) -> f64 {
        let h = self.hubble(t);
        self.hubble_prime(t) + h * h
    }

    /// log ∫₀ᵗ α(u) du (closed form where available).
    pub fn log_int_alpha(&self, t: f64) -> f64 {
        match &self.family {
            Family::Constant { value } => value.ln() + t.ln(),
            Family::Exponential { h } if *h > 0.0 => {
                let x = h * t;
                x + (-(-x).exp()).ln_1p() - h.ln()
            }
            Family::Exponential { .. } => t.ln(),
            Family::Power { c } => (c + 1.0) * t.ln() - (c + 1.0).ln(),
            Family::Sinh => std::f64::consts::LN_2 + 2.0 * log_sinh(0.5 * t),
            Family::Polynomial { coeffs } => {
                let lt = t.ln();
                log_sum_exp(
                    coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(k, p)| p.ln() + (k as f64 + 1.0) * lt - (k as f64 + 1.0).ln()),
                )
            }
            _ => self.log_int_alpha_quadrature(t),
        }
    }

    /// Quadrature route for log ∫₀ᵗ α, integrating α(u)/α(t) to avoid
    /// overflow.
    pub fn log_int_alpha_quadrature(&self, t: f64) -> f64 {
        let la = self.log_alpha(t);
        let f = |u: f64| {
            if u <= 0.0 {
                0.0
            } else {
                (self.log_alpha(u) - la).exp()
            }
        };
        // Split near zero geometrically so t^γ-type behaviour at 0 is resolved.
        let lo = (1e-12 * t).min(1e-12);
        let head = quadrature::integrate(&f, 0.0, lo, 1e-300, 1e-10)
            .map(|q| q.value)
            .unwrap_or(0.0);
        let body = quadrature::integrate_geometric(&f, lo, t, 1e-11).unwrap_or(f64::NAN);
        la + (head + body).ln()
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, p| acc * t + p)
}

/// α^{(k)}/α for a polynomial, evaluated stably for large t by factoring out
/// the leading power.
fn poly_ratio(coeffs: &[f64], t: f64, order: usize) -> f64 {
    let deg = coeffs.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, p) in coeffs.iter().enumerate() {
        let tk = if t > 1.0 {
            t.powi(k as i32 - deg as i32)
        } else {
            t.powi(k as i32)
        };
        den += p * tk;
        if k >= order {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            num += p * falling * tk / t.powi(order as i32);
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<ExpansionModel> {
        vec![
            catalog("power", &[1.0]).unwrap(),
            catalog("power", &[2.0 / 3.0]).unwrap(),
            catalog("power_exp", &[1.5, 0.5]).unwrap(),
            catalog("sinh", &[]).unwrap(),
            catalog("big_crunch_radiation", &[]).unwrap(),
            catalog("poly", &[0.0, 1.0, 1.0]).unwrap(),
        ]
    }

    #[test]
    fn closed_form_h_prime_matches_differences() {
        for m in models() {
            for &t in &[0.3, 0.9, 1.7] {
                if !m.in_domain(t) {
                    continue;
                }
                let a = m.hubble_prime(t);
                let b = m.hubble_prime_fd(t);
                assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{} at {t}: {a} vs {b}", m.name());
            }
        }
    }

    #[test]
    fn hubble_is_log_derivative() {
        for m in models() {
            let t = 0.8;
            let h = 1e-6;
            let fd = (m.log_alpha(t + h) - m.log_alpha(t - h)) / (2.0 * h);
            assert!((fd - m.hubble(t)).abs() < 1e-6, "{}", m.name());
            assert!((m.alpha(t).ln() - m.log_alpha(t)).abs() < 1e-12, "{}", m.name());
        }
    }

    #[test]
    fn log_int_alpha_closed_forms_match_quadrature() {
        for m in [
            catalog("power", &[2.0]).unwrap(),
            catalog("sinh", &[]).unwrap(),
            catalog("poly", &[0.0, 1.0, 1.0]).unwrap(),
            catalog("exponential", &[1.0]).unwrap(),
        ] {
            for &t in &[0.5, 3.0, 40.0] {
                let a = m.log_int_alpha(t);
                let b = m.log_int_alpha_quadrature(t);
                assert!((a - b).abs() < 1e-8, "{} t={t}: {a} {b}", m.name());
            }
        }
    }

    #[test]
    fn sinh_is_stable_for_huge_times() {
        let m = catalog("sinh", &[]).unwrap();
        assert!((m.log_alpha(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(m.hubble(1000.0), 1.0);
    }

    #[test]
    fn bad_params_are_rejected() {
        assert!(catalog("power_exp", &[0.0, 1.5]).is_err());
        assert!(catalog("power", &[-1.0]).is_err());
        assert!(matches!(catalog("nope", &[]), Err(ModelError::UnknownFamily(_))));
        assert!(catalog("sinh", &[1.0]).is_err());
    }
}

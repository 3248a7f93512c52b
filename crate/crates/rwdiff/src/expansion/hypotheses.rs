use serde::{Deserialize, Serialize};

use super::growth::{self, GrowthClass};
use super::model::ExpansionModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Which of the two admissible endpoint behaviours the model exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointCase {
    /// T = ∞ and H ≥ 0.
    A,
    /// T < ∞, α vanishing at both ends and H → −∞ at T⁻.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub clauses: Vec<Clause>,
    pub case: Option<EndpointCase>,
    pub all_passed: bool,
}

impl HypothesisReport {
    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }
}

/// Grid used when the caller has no preference: 2^-8 … 2^11 for T = ∞, 39
/// evenly spaced interior points otherwise.
pub fn default_check_grid(model: &ExpansionModel) -> Vec<f64> {
    if model.has_finite_horizon() {
        let t = model.t_end();
        (1..40).map(|k| t * k as f64 / 40.0).collect()
    } else {
        (-8..=11).map(|k| 2f64.powi(k)).collect()
    }
}

fn clause(name: &str, passed: bool, detail: String) -> Clause {
    Clause {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Checks the admissibility hypotheses on `grid`. Failures are reported,
/// never raised.
pub fn check_hypotheses(model: &ExpansionModel, grid: &[f64]) -> HypothesisReport {
    let grid: Vec<f64> = grid.iter().cloned().filter(|&t| model.in_domain(t)).collect();
    let mut clauses = Vec::new();

    let la: Vec<f64> = grid.iter().map(|&t| model.log_alpha(t)).collect();
    let bad = grid.iter().zip(&la).find(|(_, l)| !l.is_finite() || l.is_nan());
    clauses.push(clause(
        "positivity",
        bad.is_none() && !grid.is_empty(),
        match bad {
            Some((t, _)) => format!("alpha not positive and finite at t = {t}"),
            None => format!("alpha > 0 at {} grid points", grid.len()),
        },
    ));

    let hs: Vec<f64> = grid.iter().map(|&t| model.hubble(t)).collect();
    let hps: Vec<f64> = grid.iter().map(|&t| model.hubble_prime(t)).collect();
    let rough = grid
        .iter()
        .zip(hs.iter().zip(&hps))
        .find(|(_, (h, hp))| !h.is_finite() || !hp.is_finite());
    clauses.push(clause(
        "smoothness",
        rough.is_none(),
        match rough {
            Some((t, _)) => format!("H or H' not finite at t = {t}"),
            None => "H and H' finite on the grid".into(),
        },
    ));

    let rising = grid
        .windows(2)
        .zip(hs.windows(2))
        .find(|(_, h)| h[1] > h[0] + 1e-9 * (1.0 + h[0].abs()));
    clauses.push(clause(
        "log_concavity",
        rising.is_none(),
        match rising {
            Some((t, h)) => format!("H increases from {} to {} on [{}, {}]", h[0], h[1], t[0], t[1]),
            None => "H nonincreasing on the grid".into(),
        },
    ));

    let case;
    if model.has_finite_horizon() {
        let (ok, detail) = check_case_b(model);
        case = ok.then_some(EndpointCase::B);
        clauses.push(clause("endpoint_case", ok, detail));
    } else {
        let neg = grid.iter().zip(&hs).find(|(_, h)| **h < -1e-12);
        case = neg.is_none().then_some(EndpointCase::A);
        clauses.push(clause(
            "endpoint_case",
            neg.is_none(),
            match neg {
                Some((t, h)) => format!("T = inf but H({t}) = {h} < 0"),
                None => "case (a): T = inf and H >= 0".into(),
            },
        ));
    }

    let base_ok = clauses.iter().all(|c| c.passed);
    if base_ok && !model.has_finite_horizon() {
        if let Ok(GrowthClass::Subexponential { .. }) =
            growth::classify_growth(model, &growth::default_probe_grid())
        {
            clauses.push(hypothesis_two(model));
        }
    }

    let all_passed = clauses.iter().all(|c| c.passed);
    HypothesisReport {
        clauses,
        case,
        all_passed,
    }
}

fn check_case_b(model: &ExpansionModel) -> (bool, String) {
    let t_end = model.t_end();
    let eps: Vec<f64> = (2..=10).map(|k| t_end * 10f64.powi(-k)).collect();
    let mid = model.log_alpha(0.5 * t_end);
    let vanishes = |pts: &[f64]| {
        let la: Vec<f64> = pts.iter().map(|&t| model.log_alpha(t)).collect();
        la.windows(2).all(|w| w[1] < w[0]) && *la.last().unwrap() < mid + (1e-3f64).ln()
    };
    let left: Vec<f64> = eps.clone();
    let right: Vec<f64> = eps.iter().map(|e| t_end - e).collect();
    let left_ok = vanishes(&left);
    let right_ok = vanishes(&right);
    let hr: Vec<f64> = right.iter().map(|&t| model.hubble(t)).collect();
    let h_blows = hr.windows(2).all(|w| w[1] < w[0]) && *hr.last().unwrap() < -1e3 / t_end;
    let ok = left_ok && right_ok && h_blows;
    (
        ok,
        format!(
            "case (b): alpha -> 0 at 0+: {left_ok}, at T-: {right_ok}; H -> -inf at T-: {h_blows}"
        ),
    )
}

fn hypothesis_two(model: &ExpansionModel) -> Clause {
    let grid = growth::default_probe_grid();
    let ks: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let h = model.hubble(t);
            -model.hubble_prime(t) / (h * h)
        })
        .collect();
    let tail = &ks[ks.len() / 2..];
    let lim = growth::tail_limit(&ks, 1e-3).ok();
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let liminf = lim.map_or(min, |l| l.min(min));
    let passed = liminf <= 1e-2 && max.is_finite();
    clause(
        "hypothesis_2",
        passed,
        format!("-H'/H^2 on the tail: liminf estimate {liminf:.3e}, sup {max:.3e}"),
    )
}

/// Pointwise values of the two energy inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub t: f64,
    /// −2(α''/α − α'²/α² + 2k/α²).
    pub weak: f64,
    /// −α''/α (same sign as −α'').
    pub strong: f64,
    pub weak_ok: bool,
    pub strong_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub k: i8,
    pub points: Vec<EnergyPoint>,
    pub weak_fraction: f64,
    pub strong_fraction: f64,
}

/// Evaluates the weak and strong energy inequalities on `grid` for fiber
/// curvature `k`.
pub fn energy_conditions(model: &ExpansionModel, k: i8, grid: &[f64]) -> EnergyReport {
    let points: Vec<EnergyPoint> = grid
        .iter()
        .cloned()
        .filter(|&t| model.in_domain(t))
        .map(|t| {
            let hp = model.hubble_prime(t);
            let h = model.hubble(t);
            let inv_a2 = (-2.0 * model.log_alpha(t)).exp();
            // α''/α − α'²/α² = H'.
            let weak = -2.0 * (hp + 2.0 * k as f64 * inv_a2);
            let strong = -(hp + h * h);
            EnergyPoint {
                t,
                weak,
                strong,
                weak_ok: weak >= -1e-12,
                strong_ok: strong >= -1e-12,
            }
        })
        .collect();
    let n = points.len().max(1) as f64;
    let weak_fraction = points.iter().filter(|p| p.weak_ok).count() as f64 / n;
    let strong_fraction = points.iter().filter(|p| p.strong_ok).count() as f64 / n;
    EnergyReport {
        k,
        points,
        weak_fraction,
        strong_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{catalog, ExpansionModel};

    #[test]
    fn sinh_passes_case_a() {
        let m = catalog("sinh", &[]).unwrap();
        let r = check_hypotheses(&m, &default_check_grid(&m));
        assert!(r.all_passed, "{r:?}");
        assert_eq!(r.case, Some(EndpointCase::A));
    }

    #[test]
    fn big_crunch_passes_case_b() {
        let m = catalog("big_crunch_radiation", &[]).unwrap();
        let r = check_hypotheses(&m, &default_check_grid(&m));
        assert!(r.all_passed, "{r:?}");
        assert_eq!(r.case, Some(EndpointCase::B));
    }

    #[test]
    fn gaussian_growth_fails_log_concavity() {
        let m = ExpansionModel::custom("exp_t2", None, |t| t * t, |t| 2.0 * t, None);
        let r = check_hypotheses(&m, &default_check_grid(&m));
        assert!(!r.clause("log_concavity").unwrap().passed);
        assert!(!r.all_passed);
    }

    #[test]
    fn subexponential_models_get_hypothesis_two() {
        let m = catalog("power_exp", &[0.0, 0.5]).unwrap();
        let r = check_hypotheses(&m, &default_check_grid(&m));
        assert!(r.clause("hypothesis_2").unwrap().passed, "{r:?}");
    }

    #[test]
    fn concave_alpha_satisfies_strong_condition() {
        let m = catalog("big_crunch_radiation", &[]).unwrap();
        let g = default_check_grid(&m);
        for k in [-1, 0, 1] {
            assert_eq!(energy_conditions(&m, k, &g).strong_fraction, 1.0);
        }
    }

    #[test]
    fn flat_log_concave_satisfies_weak_condition() {
        for m in [catalog("sinh", &[]).unwrap(), catalog("power", &[2.0]).unwrap()] {
            let r = energy_conditions(&m, 0, &default_check_grid(&m));
            assert_eq!(r.weak_fraction, 1.0);
        }
    }
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::Improper;

use super::growth::{self, GrowthClass, GrowthError};
use super::horizon::{self, Extent, HorizonError, HorizonIntegrals};
use super::hypotheses::{self, HypothesisReport};
use super::model::ExpansionModel;

/// Asymptotic behaviour of ṫ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TdotBehavior {
    Transient,
    TransientInProbability { as_transient_iff_hd_integrable: bool },
    HarrisRecurrent {
        #[serde(rename = "invariant_H")]
        invariant_h: f64,
    },
    FiniteLifetimeDivergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionBehavior {
    Converges,
    RecurrentSphericalBM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionBehavior {
    ConvergesInFiber,
    EscapesAlongHypersurface,
    GreatCircle,
}

/// Which branch of the clock dichotomy decided `clock_convergent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockBasis {
    FiniteLifetime,
    PolynomialGrowth,
    ExponentialGrowth,
    /// Subexponential, H³ integrable (d > 3) or H^{3−η} integrable (d = 3).
    SubexponentialIntegrable,
    /// d = 3 with H³ integrable but no H^{3−η} integrable.
    SubexponentialCritical,
    SubexponentialNotIntegrable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    pub growth: GrowthClass,
    pub horizons: HorizonIntegrals,
    pub tdot_behavior: TdotBehavior,
    pub clock_convergent: bool,
    pub clock_basis: ClockBasis,
    pub direction_behavior: DirectionBehavior,
    pub position_behavior: PositionBehavior,
    pub lifetime_finite: bool,
    pub fiber_curvature: i8,
    pub d: usize,
    pub sigma: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("model fails the admissibility hypotheses: {0:?}")]
    NotAdmissible(Box<HypothesisReport>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("indeterminate growth class: {0}")]
    Growth(#[from] GrowthError),
    #[error("indeterminate horizon quantity: {0}")]
    Horizon(#[from] HorizonError),
}

/// Quadrature tolerance used by the predictor.
const TOL: f64 = 1e-6;

/// Exponent reductions η tried for the d = 3 refinement, largest first.
const ETAS: [f64; 4] = [0.25, 0.1, 0.05, 0.02];

/// Decides convergence of the clock for a subexponential model.
fn subexponential_clock(model: &ExpansionModel, d: usize) -> Result<(bool, ClockBasis), PredictError> {
    if d > 3 {
        return match horizon::hubble_power_integral(model, 3.0, TOL)? {
            Improper::Finite { .. } => Ok((true, ClockBasis::SubexponentialIntegrable)),
            Improper::Infinite => Ok((false, ClockBasis::SubexponentialNotIntegrable)),
            Improper::Indeterminate { partial } => Err(HorizonError::Indeterminate {
                which: "integral of H^3".into(),
                partial,
            }
            .into()),
        };
    }
    for eta in ETAS {
        if horizon::hubble_power_integral(model, 3.0 - eta, TOL)?.is_finite() {
            return Ok((true, ClockBasis::SubexponentialIntegrable));
        }
    }
    let cube = horizon::hubble_power_integral(model, 3.0, TOL)?;
    match cube {
        Improper::Infinite => Ok((false, ClockBasis::SubexponentialNotIntegrable)),
        Improper::Finite { .. } => Ok((false, ClockBasis::SubexponentialCritical)),
        Improper::Indeterminate { partial } => {
            // H ~ t^{-p}: every H^{3-η} integrable iff 3p > 1.
            let p = horizon::tail_power_exponent(model);
            if 3.0 * p <= 1.0 + 0.05 {
                Ok((false, ClockBasis::SubexponentialCritical))
            } else {
                Err(HorizonError::Indeterminate {
                    which: "integral of H^3".into(),
                    partial,
                }
                .into())
            }
        }
    }
}

/// Theory-side prediction of every asymptotic regime for the model on a
/// fiber of curvature `fiber_curvature` and dimension `d`.
pub fn predict_regimes(
    model: &ExpansionModel,
    fiber_curvature: i8,
    d: usize,
    sigma: f64,
) -> Result<RegimePrediction, PredictError> {
    if !(-1..=1).contains(&fiber_curvature) {
        return Err(PredictError::InvalidInput(format!(
            "fiber curvature must be -1, 0 or 1, got {fiber_curvature}"
        )));
    }
    if d < 3 {
        return Err(PredictError::InvalidInput(format!("d must be at least 3, got {d}")));
    }
    if !(sigma > 0.0) {
        return Err(PredictError::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let report = hypotheses::check_hypotheses(model, &hypotheses::default_check_grid(model));
    if !report.all_passed {
        return Err(PredictError::NotAdmissible(Box::new(report)));
    }
    let growth = growth::classify_growth(model, &growth::default_probe_grid())?;
    let horizons = horizon::horizon_integrals(model, horizon::default_split_point(model), TOL)?;

    let tdot_behavior = match growth {
        GrowthClass::BigCrunch => TdotBehavior::FiniteLifetimeDivergent,
        GrowthClass::Polynomial { .. } => TdotBehavior::Transient,
        GrowthClass::Subexponential { .. } => TdotBehavior::TransientInProbability {
            as_transient_iff_hd_integrable: horizon::hd_integrable(model, d, TOL)?,
        },
        GrowthClass::Exponential { h_inf } => TdotBehavior::HarrisRecurrent { invariant_h: h_inf },
    };
    let (clock_convergent, clock_basis) = match growth {
        GrowthClass::BigCrunch => (true, ClockBasis::FiniteLifetime),
        GrowthClass::Polynomial { .. } => (true, ClockBasis::PolynomialGrowth),
        GrowthClass::Exponential { .. } => (false, ClockBasis::ExponentialGrowth),
        GrowthClass::Subexponential { .. } => subexponential_clock(model, d)?,
    };
    let direction_behavior = if clock_convergent {
        DirectionBehavior::Converges
    } else {
        DirectionBehavior::RecurrentSphericalBM
    };
    let position_behavior = match (horizons.i_plus, fiber_curvature) {
        (Extent::Finite(_), _) => PositionBehavior::ConvergesInFiber,
        (Extent::Infinite, 1) => PositionBehavior::GreatCircle,
        (Extent::Infinite, _) => PositionBehavior::EscapesAlongHypersurface,
    };
    Ok(RegimePrediction {
        growth,
        horizons,
        tdot_behavior,
        clock_convergent,
        clock_basis,
        direction_behavior,
        position_behavior,
        lifetime_finite: model.has_finite_horizon(),
        fiber_curvature,
        d,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;

    #[test]
    fn de_sitter_on_hyperbolic_fiber() {
        let p = predict_regimes(&catalog("sinh", &[]).unwrap(), -1, 3, 1.0).unwrap();
        assert_eq!(p.tdot_behavior, TdotBehavior::HarrisRecurrent { invariant_h: 1.0 });
        assert!(!p.clock_convergent);
        assert_eq!(p.direction_behavior, DirectionBehavior::RecurrentSphericalBM);
        assert_eq!(p.position_behavior, PositionBehavior::ConvergesInFiber);
        assert!(!p.lifetime_finite);
    }

    #[test]
    fn matter_dominated_flat() {
        let p = predict_regimes(&catalog("power", &[2.0 / 3.0]).unwrap(), 0, 3, 1.0).unwrap();
        assert_eq!(p.tdot_behavior, TdotBehavior::Transient);
        assert!(p.clock_convergent);
        assert_eq!(p.direction_behavior, DirectionBehavior::Converges);
        assert_eq!(p.position_behavior, PositionBehavior::EscapesAlongHypersurface);
    }

    #[test]
    fn big_crunch_on_sphere() {
        let p = predict_regimes(&catalog("big_crunch_radiation", &[]).unwrap(), 1, 3, 1.0).unwrap();
        assert!(p.lifetime_finite);
        assert_eq!(p.tdot_behavior, TdotBehavior::FiniteLifetimeDivergent);
        assert!(p.clock_convergent);
        assert_eq!(p.direction_behavior, DirectionBehavior::Converges);
        assert_eq!(p.position_behavior, PositionBehavior::ConvergesInFiber);
    }

    #[test]
    fn subexponential_transience_flag() {
        let slow = predict_regimes(&catalog("power_exp", &[0.0, 0.5]).unwrap(), 0, 3, 1.0).unwrap();
        assert_eq!(
            slow.tdot_behavior,
            TdotBehavior::TransientInProbability { as_transient_iff_hd_integrable: true }
        );
        assert!(slow.clock_convergent);
        let fast = predict_regimes(&catalog("power_exp", &[0.0, 0.8]).unwrap(), 0, 3, 1.0).unwrap();
        assert_eq!(
            fast.tdot_behavior,
            TdotBehavior::TransientInProbability { as_transient_iff_hd_integrable: false }
        );
        assert!(!fast.clock_convergent);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = catalog("sinh", &[]).unwrap();
        assert!(predict_regimes(&m, 2, 3, 1.0).is_err());
        assert!(predict_regimes(&m, 0, 2, 1.0).is_err());
        assert!(predict_regimes(&m, 0, 3, 0.0).is_err());
    }
}

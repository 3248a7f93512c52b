use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::expansion::predict::{DirectionBehavior, PositionBehavior, TdotBehavior};
use crate::expansion::RegimePrediction;
use crate::spatial::BoundaryPoint;
use crate::temporal::InvariantMeasure;

use super::config::Tolerances;
use super::ensemble::{Estimate, EnsembleStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("claim `{claim}` needs the `{statistic}` statistic, which the ensemble did not compute")]
    MissingEstimator { claim: &'static str, statistic: &'static str },
    #[error("cannot build the reference invariant law: {0}")]
    Reference(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Unconverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub claim: String,
    pub theory: Value,
    pub empirical: Value,
    pub tolerance: f64,
    pub outcome: Outcome,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub claims: Vec<ClaimVerdict>,
    pub passed: usize,
    pub failed: usize,
    pub unconverged: usize,
}

impl VerdictReport {
    fn new(claims: Vec<ClaimVerdict>) -> Self {
        let count = |o| claims.iter().filter(|c| c.outcome == o).count();
        VerdictReport {
            passed: count(Outcome::Pass),
            failed: count(Outcome::Fail),
            unconverged: count(Outcome::Unconverged),
            claims,
        }
    }

    /// True when no claim failed; unconverged claims do not count against.
    pub fn no_failures(&self) -> bool {
        self.failed == 0
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.claims.len()
    }

    pub fn claim(&self, name: &str) -> Option<&ClaimVerdict> {
        self.claims.iter().find(|c| c.claim == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn missing(claim: &'static str, statistic: &'static str) -> VerifyError {
    VerifyError::MissingEstimator { claim, statistic }
}

fn outcome(pass: bool, fail: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else if fail {
        Outcome::Fail
    } else {
        Outcome::Unconverged
    }
}

/// Significantly above `floor`: mean − 3 SE > floor.
fn above(e: &Estimate, floor: f64) -> bool {
    e.estimate - 3.0 * e.std_error.max(0.0) > floor
}

/// Significantly below `floor`: mean + 3 SE < floor.
fn below(e: &Estimate, floor: f64) -> bool {
    e.estimate + 3.0 * e.std_error.max(0.0) < floor
}

/// KS distance of the pooled occupation against ν_{h,σ}; exact when the
/// ensemble already used that reference, otherwise evaluated at the stored
/// occupation quantiles.
fn ks_against(stats: &EnsembleStats, h: f64) -> Result<Option<f64>, VerifyError> {
    if let Some(ks) = &stats.ks {
        if (ks.h - h).abs() <= 1e-12 * h.abs().max(1.0) {
            return Ok(Some(ks.distance));
        }
    }
    let Some(q) = &stats.occupation_quantiles else {
        return Ok(None);
    };
    if !(h > 0.0) {
        return Ok(Some(1.0));
    }
    let m = InvariantMeasure::new(h, stats.config.sigma, stats.config.d)
        .map_err(|e| VerifyError::Reference(e.to_string()))?;
    Ok(Some(
        q.iter().map(|(level, v)| (level - m.cdf(*v)).abs()).fold(0.0, f64::max),
    ))
}

fn tdot_claim(stats: &EnsembleStats, pred: &RegimePrediction, tol: &Tolerances) -> Result<ClaimVerdict, VerifyError> {
    const C: &str = "tdot_behavior";
    let theory = serde_json::to_value(pred.tdot_behavior).expect("serializable");
    let returns = stats.returns.as_ref();
    let ratio = returns.map(|r| r.last_increase_ratio());
    let stabilized = returns.map(|r| r.last_increase_ratio() <= tol.returns_stable);
    let growing = returns.map(|r| r.strictly_increasing() && r.last_increase_ratio() >= tol.returns_growing);
    let verdict = |empirical: Value, tolerance: f64, o: Outcome, note: &str| ClaimVerdict {
        claim: C.into(),
        theory: theory.clone(),
        empirical,
        tolerance,
        outcome: o,
        note: note.into(),
    };
    Ok(match pred.tdot_behavior {
        TdotBehavior::Transient => {
            let rate = stats.statistic("rate_tdot").ok_or_else(|| missing(C, "rates"))?;
            let stable = stabilized.ok_or_else(|| missing(C, "returns"))?;
            let positive = above(rate, 0.0) && rate.estimate > tol.rate_floor;
            verdict(
                json!({"rate_tdot": rate.estimate, "rate_tdot_se": rate.std_error, "returns_last_increase": ratio}),
                tol.rate_floor,
                outcome(positive && stable, below(rate, tol.rate_floor)),
                "positive log-tdot rate and stabilized return counts",
            )
        }
        TdotBehavior::TransientInProbability { as_transient_iff_hd_integrable } => {
            let r = returns.ok_or_else(|| missing(C, "returns"))?;
            let g = &r.log_tdot_growth;
            let counts_ok = if as_transient_iff_hd_integrable {
                stabilized.unwrap_or(false)
            } else {
                growing.unwrap_or(false)
            };
            verdict(
                json!({"return_totals": r.totals, "log_tdot_growth": g.estimate, "log_tdot_growth_se": g.std_error}),
                if as_transient_iff_hd_integrable { tol.returns_stable } else { tol.returns_growing },
                outcome(counts_ok && above(g, 0.0), below(g, 0.0)),
                if as_transient_iff_hd_integrable {
                    "tdot grows and return counts stabilize"
                } else {
                    "tdot grows while return counts keep growing"
                },
            )
        }
        TdotBehavior::HarrisRecurrent { invariant_h } => {
            let ks = ks_against(stats, invariant_h)?.ok_or_else(|| missing(C, "occupation"))?;
            let grow = growing.ok_or_else(|| missing(C, "returns"))?;
            let rate_positive = stats.statistic("rate_tdot").is_some_and(|r| above(r, tol.rate_floor));
            verdict(
                json!({"ks": ks, "return_totals": returns.map(|r| r.totals.clone())}),
                tol.ks,
                outcome(ks < tol.ks && grow, rate_positive || ks > 0.5),
                "occupation of tdot matches the invariant law and returns keep growing",
            )
        }
        TdotBehavior::FiniteLifetimeDivergent => {
            let f = stats.horizon_fraction();
            verdict(
                json!({"horizon_fraction": f}),
                tol.majority,
                outcome(f >= tol.majority, false),
                "trajectories reach the horizon in finite proper time",
            )
        }
    })
}

fn clock_claim(stats: &EnsembleStats, pred: &RegimePrediction, tol: &Tolerances) -> Result<ClaimVerdict, VerifyError> {
    let c = stats.clock.as_ref().ok_or_else(|| missing("clock_convergent", "clock"))?;
    let n = stats.n_traj as f64;
    let conv = c.converging as f64 / n;
    let div = c.diverging as f64 / n;
    let (agree, disagree) = if pred.clock_convergent { (conv, div) } else { (div, conv) };
    Ok(ClaimVerdict {
        claim: "clock_convergent".into(),
        theory: json!(pred.clock_convergent),
        empirical: json!({"converging": c.converging, "diverging": c.diverging, "undetermined": c.undetermined}),
        tolerance: tol.majority,
        outcome: outcome(agree >= tol.majority, disagree > 0.5),
        note: "majority clock verdict".into(),
    })
}

fn direction_claim(stats: &EnsembleStats, pred: &RegimePrediction, tol: &Tolerances) -> Result<ClaimVerdict, VerifyError> {
    let b = stats.boundary.as_ref().ok_or_else(|| missing("direction_behavior", "boundary"))?;
    let n = stats.n_traj as f64;
    let tight = b.records.iter().filter(|r| r.direction_spread < tol.boundary.tol_tail).count() as f64 / n;
    let loose = b.records.iter().filter(|r| r.direction_spread >= tol.boundary.tol_tail).count() as f64 / n;
    let o = match pred.direction_behavior {
        DirectionBehavior::Converges => outcome(tight >= tol.majority, false),
        DirectionBehavior::RecurrentSphericalBM => outcome(loose >= tol.majority, tight >= tol.majority),
    };
    Ok(ClaimVerdict {
        claim: "direction_behavior".into(),
        theory: serde_json::to_value(pred.direction_behavior).expect("serializable"),
        empirical: json!({"settled_fraction": tight, "moving_fraction": loose}),
        tolerance: tol.boundary.tol_tail,
        outcome: o,
        note: "spread of the asymptotic direction over the tail".into(),
    })
}

fn position_claim(stats: &EnsembleStats, pred: &RegimePrediction, tol: &Tolerances) -> Result<ClaimVerdict, VerifyError> {
    let b = stats.boundary.as_ref().ok_or_else(|| missing("position_behavior", "boundary"))?;
    let n = stats.n_traj as f64;
    let matches_kind = |p: &BoundaryPoint| {
        matches!(
            (pred.position_behavior, p),
            (PositionBehavior::ConvergesInFiber, BoundaryPoint::FiberPoint { .. })
                | (PositionBehavior::EscapesAlongHypersurface, BoundaryPoint::NullDirection { .. })
                | (PositionBehavior::GreatCircle, BoundaryPoint::GreatCircle { .. })
        )
    };
    let right_kind = b.records.iter().filter(|r| matches_kind(&r.report.point)).count() as f64 / n;
    let converged = b
        .records
        .iter()
        .filter(|r| matches_kind(&r.report.point) && r.report.converged())
        .count() as f64
        / n;
    Ok(ClaimVerdict {
        claim: "position_behavior".into(),
        theory: serde_json::to_value(pred.position_behavior).expect("serializable"),
        empirical: json!({"kinds": b.kinds, "converged_fraction": converged}),
        tolerance: tol.majority,
        outcome: outcome(converged >= tol.majority, right_kind < 0.5),
        note: "boundary limit kind and its convergence certificate".into(),
    })
}

fn lifetime_claim(stats: &EnsembleStats, pred: &RegimePrediction, tol: &Tolerances) -> ClaimVerdict {
    let f = stats.horizon_fraction();
    let o = if pred.lifetime_finite {
        outcome(f >= tol.majority, false)
    } else {
        outcome(f == 0.0, f > 0.0)
    };
    ClaimVerdict {
        claim: "lifetime_finite".into(),
        theory: json!(pred.lifetime_finite),
        empirical: json!({"horizon_fraction": f}),
        tolerance: tol.majority,
        outcome: o,
        note: "fraction of trajectories ending at the horizon".into(),
    }
}

/// Confronts each predicted behaviour with its empirical test. Claims whose
/// evidence is inconclusive are reported as unconverged, not failed.
pub fn verify_regime(
    stats: &EnsembleStats,
    prediction: &RegimePrediction,
    tolerances: &Tolerances,
) -> Result<VerdictReport, VerifyError> {
    Ok(VerdictReport::new(vec![
        tdot_claim(stats, prediction, tolerances)?,
        clock_claim(stats, prediction, tolerances)?,
        direction_claim(stats, prediction, tolerances)?,
        position_claim(stats, prediction, tolerances)?,
        lifetime_claim(stats, prediction, tolerances),
    ]))
}

//! Independent reference scheme working directly on (t, ṫ).
//!
//! dṫ = [−H(t)(ṫ² − 1) + (dσ²/2)ṫ] ds + σ√(ṫ² − 1) dB, with the drift
//! tamed as μ/(1 + h|μ|) and ṫ floored at 1.

use serde::{Deserialize, Serialize};

use crate::expansion::ExpansionModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamedState {
    pub s: f64,
    pub t: f64,
    pub tdot: f64,
}

pub fn step_tamed(
    state: &TamedState,
    model: &ExpansionModel,
    sigma: f64,
    d: usize,
    h: f64,
    dw: f64,
) -> TamedState {
    let x = state.tdot;
    let w = (x * x - 1.0).max(0.0);
    let mu = -model.hubble(state.t) * w + 0.5 * d as f64 * sigma * sigma * x;
    let tamed = mu / (1.0 + h * mu.abs());
    let next = x + tamed * h + sigma * w.sqrt() * h.sqrt() * dw;
    TamedState {
        s: state.s + h,
        t: state.t + x * h,
        tdot: next.max(1.0),
    }
}

/// Path of the tamed scheme for a fixed step and given standard normal
/// draws (one per step); includes the initial state.
pub fn simulate_tamed(
    init: TamedState,
    model: &ExpansionModel,
    sigma: f64,
    d: usize,
    h: f64,
    draws: &[f64],
) -> Vec<TamedState> {
    let mut out = Vec::with_capacity(draws.len() + 1);
    out.push(init);
    let mut st = init;
    for &dw in draws {
        st = step_tamed(&st, model, sigma, d, h, dw);
        out.push(st);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;

    #[test]
    fn floor_and_taming() {
        let m = catalog("constant", &[]).unwrap();
        let s = step_tamed(&TamedState { s: 0.0, t: 1.0, tdot: 1.0 }, &m, 1.0, 3, 0.01, -100.0);
        assert!((s.tdot - (1.0 + 1.5 * 0.01 / 1.015)).abs() < 1e-15);
        let big = step_tamed(&TamedState { s: 0.0, t: 1.0, tdot: 1e8 }, &catalog("sinh", &[]).unwrap(), 0.0, 3, 0.1, 0.0);
        assert!(big.tdot > 1e8 - 20.0);
    }
}

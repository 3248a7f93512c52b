//! Adaptive Gauss–Kronrod quadrature and improper-integral tails with
//! divergence detection.
//!
//! Finite intervals use a globally adaptive 7/15-point Gauss–Kronrod rule.
//! Improper tails are split into geometric blocks (each block halves the
//! distance to a finite endpoint, or doubles the abscissa towards `+∞`), and
//! the sequence of partial sums decides between a certified finite value, a
//! certified divergence and an honest "indeterminate".

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kronrod abscissae on [0, 1] (symmetric rule, 15 points).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the embedded 7-point rule (odd Kronrod nodes).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("adaptive quadrature did not reach tolerance (estimate {value}, error {error})")]
    NoConvergence { value: f64, error: f64 },
}

/// Value and error estimate of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(c));
    }
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let (x1, x2) = (c - dx, c + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * hl;
    let err = ((kron - gauss) * hl).abs();
    Ok((value, err))
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Orientation is respected: swapping the endpoints flips the sign.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quad, QuadError> {
    if a == b {
        return Ok(Quad { value: 0.0, error: 0.0 });
    }
    if b < a {
        let q = integrate(f, b, a, abs_tol, rel_tol)?;
        return Ok(Quad { value: -q.value, error: q.error });
    }
    const MAX_INTERVALS: usize = 2000;
    let (v0, e0) = gk15(&f, a, b)?;
    let mut parts: Vec<(f64, f64, f64, f64)> = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= MAX_INTERVALS {
            return Err(QuadError::NoConvergence { value: total, error: err });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty partition");
        let (lo, hi, v, e) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval can no longer be split in floating point.
            parts.push((lo, hi, v, 0.0));
            err -= e;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid)?;
        let (v2, e2) = gk15(&f, mid, hi)?;
        total += v1 + v2 - v;
        err += e1 + e2 - e;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        if parts.iter().all(|p| p.3 == 0.0) {
            break;
        }
    }
    // Recompute the sums from scratch to shed accumulated cancellation.
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Ok(Quad { value, error })
}

/// Integral over `[a, b]` with `0 < a < b`, split into pieces whose endpoint
/// ratio is at most two. Suited to integrands varying on the scale of `x`.
pub fn integrate_geometric<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_geometric(f, b, a, rel_tol).map(|v| -v);
    }
    if a <= 0.0 || b / a <= 2.0 {
        return integrate(&f, a, b, 1e-300, rel_tol).map(|q| q.value);
    }
    let mut sum = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        sum += integrate(&f, lo, hi, 1e-300, rel_tol)?.value;
        lo = hi;
    }
    Ok(sum)
}

/// The endpoint an improper tail runs towards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailEnd {
    /// Towards `0⁺` from the start point.
    Zero,
    /// Towards a finite right endpoint from below.
    Finite(f64),
    /// Towards `+∞`.
    Infinity,
}

/// Verdict of an improper-integral computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Improper {
    Finite { value: f64 },
    Infinite,
    Indeterminate { partial: f64 },
}

impl Improper {
    pub fn is_finite(&self) -> bool {
        matches!(self, Improper::Finite { .. })
    }
    pub fn is_infinite(&self) -> bool {
        matches!(self, Improper::Infinite)
    }
    pub fn value(&self) -> Option<f64> {
        match self {
            Improper::Finite { value } => Some(*value),
            _ => None,
        }
    }
}

/// Tuning knobs for [`improper_tail`].
#[derive(Debug, Clone, Copy)]
pub struct TailOptions {
    /// Growth factor of the partial sum under doubling of the block count
    /// that counts as evidence of divergence.
    pub growth_factor: f64,
    /// Number of consecutive doublings (ending at the deepest level) that
    /// must exceed `growth_factor`.
    pub consecutive: usize,
    /// Maximum number of geometric blocks towards `0⁺` or `+∞`.
    pub max_blocks_unbounded: usize,
    /// Maximum number of geometric blocks towards a finite endpoint.
    pub max_blocks_finite: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            growth_factor: 1.5,
            consecutive: 3,
            max_blocks_unbounded: 512,
            max_blocks_finite: 48,
        }
    }
}

fn block_bounds(start: f64, end: TailEnd, k: usize) -> (f64, f64) {
    match end {
        TailEnd::Infinity => {
            let lo = start * 2f64.powi(k as i32);
            (lo, 2.0 * lo)
        }
        TailEnd::Zero => {
            let hi = start * 2f64.powi(-(k as i32));
            (0.5 * hi, hi)
        }
        TailEnd::Finite(t) => {
            let w = (t - start) * 2f64.powi(-(k as i32));
            (t - w, t - 0.5 * w)
        }
    }
}

/// Integral of a nonnegative `f` from `start` towards `end`.
///
/// Blocks are integrated one at a time. Divergence is declared when the
/// partial sum over `2n` blocks exceeds `growth_factor` times the sum over
/// `n` blocks for the last `consecutive` doublings up to the deepest level.
/// A finite value is certified when the blocks decay geometrically and the
/// extrapolated remainder is below `tol · max(1, |sum|)`.
pub fn improper_tail<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    end: TailEnd,
    tol: f64,
    opts: TailOptions,
) -> Result<Improper, QuadError> {
    let max_blocks = match end {
        TailEnd::Finite(_) => opts.max_blocks_finite,
        _ => opts.max_blocks_unbounded,
    };
    let mut blocks: Vec<f64> = Vec::with_capacity(max_blocks);
    let mut sum = 0.0;
    for k in 0..max_blocks {
        let (lo, hi) = block_bounds(start, end, k);
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            break;
        }
        if let TailEnd::Finite(t) = end {
            // Below this width x = T − u is dominated by rounding of T.
            if hi - lo < 1e-11 * t.abs().max(1.0) {
                break;
            }
        }
        let b = match integrate(&f, lo, hi, 1e-300, 1e-10) {
            Ok(q) => q.value.abs(),
            Err(QuadError::NoConvergence { value, .. }) => value.abs(),
            Err(e) => return Err(e),
        };
        blocks.push(b);
        sum += b;
        if !sum.is_finite() {
            return Ok(Improper::Infinite);
        }
        if let Some(rest) = geometric_remainder(&blocks) {
            if blocks.len() >= 8 && rest <= 1e-3 * tol * sum.max(1.0) {
                return Ok(Improper::Finite { value: sum + rest });
            }
        }
    }
    let n = blocks.len();
    if diverging_partial_sums(&blocks, opts.growth_factor, opts.consecutive) {
        return Ok(Improper::Infinite);
    }
    match geometric_remainder(&blocks) {
        Some(rest) if rest <= tol * sum.max(1.0) => Ok(Improper::Finite { value: sum + rest }),
        Some(rest) if rest * ratio_spread(&blocks) <= tol * sum.max(1.0) => {
            Ok(Improper::Finite { value: sum + rest })
        }
        _ if n > 0 && blocks.iter().rev().take(4).all(|&b| b == 0.0) => {
            Ok(Improper::Finite { value: sum })
        }
        _ => Ok(Improper::Indeterminate { partial: sum }),
    }
}

/// Extrapolated remainder of a block sequence whose last terms decay
/// geometrically; `None` when they do not.
fn geometric_remainder(blocks: &[f64]) -> Option<f64> {
    let n = blocks.len();
    if n < 4 {
        return None;
    }
    let last = blocks[n - 1];
    if last == 0.0 {
        return Some(0.0);
    }
    let mut ratio: f64 = 0.0;
    for w in blocks[n - 4..].windows(2) {
        if w[0] == 0.0 {
            return None;
        }
        ratio = ratio.max(w[1] / w[0]);
    }
    if ratio >= 1.0 {
        return None;
    }
    Some(last * ratio / (1.0 - ratio))
}

/// Relative spread of the last three block ratios; small when the tail is
/// cleanly geometric and the extrapolated remainder can be trusted.
fn ratio_spread(blocks: &[f64]) -> f64 {
    let n = blocks.len();
    if n < 4 || blocks[n - 4..].iter().any(|&b| b == 0.0) {
        return f64::INFINITY;
    }
    let r: Vec<f64> = blocks[n - 4..].windows(2).map(|w| w[1] / w[0]).collect();
    let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

fn diverging_partial_sums(blocks: &[f64], factor: f64, consecutive: usize) -> bool {
    let mut depths = Vec::new();
    let mut n = 4;
    while n <= blocks.len() {
        depths.push(n);
        n *= 2;
    }
    if depths.len() < consecutive + 1 {
        return false;
    }
    let partial = |m: usize| blocks[..m].iter().sum::<f64>();
    depths
        .windows(2)
        .rev()
        .take(consecutive)
        .all(|w| partial(w[1]) > factor * partial(w[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((q.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn orientation_flips_sign() {
        let a = integrate(f64::exp, 0.0, 1.0, 1e-14, 1e-14).unwrap().value;
        let b = integrate(f64::exp, 1.0, 0.0, 1e-14, 1e-14).unwrap().value;
        assert!((a + b).abs() < 1e-15);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 1e-12, 1.0, 1e-12, 1e-12).unwrap();
        assert!((q.value - (2.0 - 2e-6)).abs() < 1e-9);
    }

    #[test]
    fn harmonic_tail_diverges() {
        let r = improper_tail(|x| 1.0 / x, 1.0, TailEnd::Infinity, 1e-8, TailOptions::default())
            .unwrap();
        assert_eq!(r, Improper::Infinite);
    }

    #[test]
    fn inverse_square_tail_converges() {
        let r = improper_tail(|x| 1.0 / (x * x), 1.0, TailEnd::Infinity, 1e-8, TailOptions::default())
            .unwrap();
        assert!((r.value().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn endpoint_singularities() {
        let opts = TailOptions::default();
        let r = improper_tail(|x: f64| x.powf(-0.5), 1.0, TailEnd::Zero, 1e-8, opts).unwrap();
        assert!((r.value().unwrap() - 2.0).abs() < 1e-7);
        let r = improper_tail(|x| 1.0 / x, 1.0, TailEnd::Zero, 1e-8, opts).unwrap();
        assert!(r.is_infinite());
        let r = improper_tail(|x: f64| (2.0 - x).powf(-0.5), 1.0, TailEnd::Finite(2.0), 1e-6, opts)
            .unwrap();
        assert!((r.value().unwrap() - 2.0).abs() < 1e-6);
        let r = improper_tail(|x| 1.0 / (2.0 - x), 1.0, TailEnd::Finite(2.0), 1e-6, opts).unwrap();
        assert!(r.is_infinite());
    }

    #[test]
    fn geometric_split_matches_plain() {
        let g = integrate_geometric(|x: f64| (-x).exp(), 0.5, 400.0, 1e-12).unwrap();
        assert!((g - ((-0.5f64).exp() - (-400f64).exp())).abs() < 1e-12);
    }
}

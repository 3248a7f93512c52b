use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberKind {
    Euclidean,
    Hyperbolic,
    Spherical,
}

/// Constant-curvature fiber of dimension d, embedded in ℝ^d (flat), the
/// unit sphere of ℝ^{d+1}, or the upper sheet x⁰ > 0 of the hyperboloid
/// q(x, x) = −1 in Minkowski space ℝ^{1,d}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fiber {
    pub kind: FiberKind,
    pub d: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiberError {
    #[error("fiber must look like r3, h3 or s3 (kind letter then dimension), got `{0}`")]
    Syntax(String),
    #[error("fiber dimension must be at least 3, got {0}")]
    Dimension(usize),
}

impl Fiber {
    pub fn new(kind: FiberKind, d: usize) -> Result<Self, FiberError> {
        if d < 3 {
            return Err(FiberError::Dimension(d));
        }
        Ok(Fiber { kind, d })
    }

    pub fn euclidean(d: usize) -> Self {
        Fiber::new(FiberKind::Euclidean, d).expect("d >= 3")
    }
    pub fn hyperbolic(d: usize) -> Self {
        Fiber::new(FiberKind::Hyperbolic, d).expect("d >= 3")
    }
    pub fn spherical(d: usize) -> Self {
        Fiber::new(FiberKind::Spherical, d).expect("d >= 3")
    }

    pub fn kappa(&self) -> i8 {
        match self.kind {
            FiberKind::Euclidean => 0,
            FiberKind::Hyperbolic => -1,
            FiberKind::Spherical => 1,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            FiberKind::Euclidean => self.d,
            _ => self.d + 1,
        }
    }

    /// Ambient bilinear form: Minkowski (−,+,…,+) on the hyperboloid,
    /// Euclidean otherwise.
    pub fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        let e: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match self.kind {
            FiberKind::Hyperbolic => e - 2.0 * a[0] * b[0],
            _ => e,
        }
    }

    /// Short label such as `h3`.
    pub fn label(&self) -> String {
        let c = match self.kind {
            FiberKind::Euclidean => 'r',
            FiberKind::Hyperbolic => 'h',
            FiberKind::Spherical => 's',
        };
        format!("{c}{}", self.d)
    }
}

impl fmt::Display for Fiber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Fiber {
    type Err = FiberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('r') | Some('R') | Some('e') | Some('E') => FiberKind::Euclidean,
            Some('h') | Some('H') => FiberKind::Hyperbolic,
            Some('s') | Some('S') => FiberKind::Spherical,
            _ => return Err(FiberError::Syntax(s.to_string())),
        };
        let d: usize = chars.as_str().parse().map_err(|_| FiberError::Syntax(s.to_string()))?;
        Fiber::new(kind, d)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_label() {
        let f: Fiber = "h3".parse().unwrap();
        assert_eq!((f.kind, f.d, f.kappa(), f.ambient_dim()), (FiberKind::Hyperbolic, 3, -1, 4));
        assert_eq!("s4".parse::<Fiber>().unwrap().label(), "s4");
        assert_eq!("r3".parse::<Fiber>().unwrap().ambient_dim(), 3);
        assert!("x3".parse::<Fiber>().is_err());
        assert!("r2".parse::<Fiber>().is_err());
    }

    #[test]
    fn minkowski_form() {
        let f = Fiber::hyperbolic(3);
        assert_eq!(f.form(&[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), -1.0);
        assert_eq!(f.form(&[2.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 0.0, 0.0]), -1.0);
    }
}

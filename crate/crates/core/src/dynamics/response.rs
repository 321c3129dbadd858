use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{DynamicsError, Outcome};
use crate::angles::wrap_2pi;

/// Probability `f(A, θ)` of outcome `A` at measurement angle `θ`. Only
/// `f(+1, ·)` is stored; `f(−1, θ) = 1 − f(+1, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResponseFunction {
    /// `cos²θ` / `sin²θ`.
    #[default]
    MalusClassical,
    /// `f(+1, θ)` sampled at `θ_k = 2πk/n`, interpolated periodically with
    /// cubic Catmull-Rom splines.
    CustomTable { plus: Vec<f64> },
}

impl ResponseFunction {
    pub fn table(plus: Vec<f64>) -> Result<Self, DynamicsError> {
        let r = ResponseFunction::CustomTable { plus };
        r.validate()?;
        Ok(r)
    }

    /// Tabulates `f(+1, ·)` from a closure.
    pub fn tabulate(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, DynamicsError> {
        Self::table((0..n).map(|k| f(TAU * k as f64 / n as f64)).collect())
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if let ResponseFunction::CustomTable { plus } = self {
            if plus.len() < 4 {
                return Err(DynamicsError::InvalidResponse("table needs at least 4 samples".into()));
            }
            if plus.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(DynamicsError::InvalidResponse("table values must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn plus(&self, theta: f64) -> f64 {
        match self {
            ResponseFunction::MalusClassical => theta.cos().powi(2),
            ResponseFunction::CustomTable { plus } => {
                let n = plus.len();
                let x = wrap_2pi(theta) / TAU * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let t = x - i as f64;
                let p = |k: isize| plus[k.rem_euclid(n as isize) as usize];
                let i = i as isize;
                let (p0, p1, p2, p3) = (p(i - 1), p(i), p(i + 1), p(i + 2));
                let v = p1
                    + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
                v.clamp(0.0, 1.0)
            }
        }
    }

    pub fn eval(&self, outcome: Outcome, theta: f64) -> f64 {
        match (self, outcome) {
            (_, Outcome::Plus) => self.plus(theta),
            (ResponseFunction::MalusClassical, Outcome::Minus) => theta.sin().powi(2),
            (_, Outcome::Minus) => 1.0 - self.plus(theta),
        }
    }

    pub fn is_malus(&self) -> bool {
        matches!(self, ResponseFunction::MalusClassical)
    }
}

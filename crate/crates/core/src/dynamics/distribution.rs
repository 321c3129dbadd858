use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::angles::wrap_2pi;
use crate::rng::uniform01;

pub const MIN_BINS: usize = 8;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Binned density on the circle. Bin `j` is centred on the node `ψ_j = jΔ`,
/// `Δ = 2π/N`, and covers `[ψ_j − Δ/2, ψ_j + Δ/2)`. Expectations use the
/// node rule `Σ_j P_j Δ g(ψ_j)`, so a single occupied bin acts as a point
/// mass at its node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleDistribution {
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl TryFrom<Vec<f64>> for AngleDistribution {
    type Error = DynamicsError;
    fn try_from(density: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(density)
    }
}

impl From<AngleDistribution> for Vec<f64> {
    fn from(d: AngleDistribution) -> Self {
        d.density
    }
}

fn check_weights(w: &[f64], min: usize) -> Result<(), DynamicsError> {
    if w.len() < min {
        return Err(DynamicsError::InvalidDistribution(format!("{} bins, at least {min} required", w.len())));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(DynamicsError::InvalidDistribution("densities must be finite and non-negative".into()));
    }
    Ok(())
}

impl AngleDistribution {
    /// Validates a density already normalised to `Σ P_j Δ = 1`.
    pub fn new(density: Vec<f64>) -> Result<Self, DynamicsError> {
        check_weights(&density, MIN_BINS)?;
        let delta = TAU / density.len() as f64;
        let total: f64 = density.iter().sum::<f64>() * delta;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DynamicsError::InvalidDistribution(format!("normalisation {total} ≠ 1")));
        }
        let mut acc = 0.0;
        let cdf = density
            .iter()
            .map(|p| {
                acc += p * delta;
                acc
            })
            .collect();
        Ok(Self { density, cdf })
    }

    /// Normalises arbitrary non-negative bin weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self, DynamicsError> {
        check_weights(weights, MIN_BINS)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(DynamicsError::InvalidDistribution("all weights are zero".into()));
        }
        let delta = TAU / weights.len() as f64;
        Self::new(weights.iter().map(|w| w / (total * delta)).collect())
    }

    /// Density proportional to `f` evaluated at the nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, DynamicsError> {
        let delta = TAU / n as f64;
        Self::from_weights(&(0..n).map(|j| f(j as f64 * delta)).collect::<Vec<_>>())
    }

    pub fn uniform(n: usize) -> Result<Self, DynamicsError> {
        Self::from_weights(&vec![1.0; n])
    }

    /// All mass in the bin whose node is nearest to `angle`.
    pub fn point_mass(n: usize, angle: f64) -> Result<Self, DynamicsError> {
        if n < MIN_BINS {
            return Err(DynamicsError::InvalidDistribution(format!("{n} bins, at least {MIN_BINS} required")));
        }
        let mut w = vec![0.0; n];
        let j = Self::nearest_bin(n, angle);
        w[j] = 1.0;
        Self::from_weights(&w)
    }

    /// Normalised histogram of `samples` over `n` bins centred on the nodes.
    pub fn histogram(n: usize, samples: &[f64]) -> Result<Self, DynamicsError> {
        if n < MIN_BINS {
            return Err(DynamicsError::InvalidDistribution(format!("{n} bins, at least {MIN_BINS} required")));
        }
        let mut w = vec![0.0; n];
        for s in samples {
            w[Self::nearest_bin(n, *s)] += 1.0;
        }
        Self::from_weights(&w)
    }

    fn nearest_bin(n: usize, angle: f64) -> usize {
        ((wrap_2pi(angle) / (TAU / n as f64)).round() as usize) % n
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self) -> f64 {
        TAU / self.density.len() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.width()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Probability mass of bin `j`.
    pub fn mass(&self, j: usize) -> f64 {
        self.density[j] * self.width()
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.density[0];
        self.density.iter().all(|p| (p - first).abs() <= 1e-14 * first.abs().max(1.0))
    }

    /// Node-rule expectation `Σ_j P_j Δ g(ψ_j)`; empty bins are skipped.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        let delta = self.width();
        self.density.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(j, p)| p * delta * g(j as f64 * delta)).sum()
    }

    /// Fourier moments `(∫P cos 2ψ, ∫P sin 2ψ)`.
    pub fn moments2(&self) -> (f64, f64) {
        (self.expect(|x| (2.0 * x).cos()), self.expect(|x| (2.0 * x).sin()))
    }

    /// Draws a node with probability equal to its bin mass.
    pub fn sample_node(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u = uniform01(rng) * self.cdf[self.cdf.len() - 1];
        let j = self.cdf.partition_point(|c| *c <= u).min(self.density.len() - 1);
        self.node(j)
    }

    /// Draws an angle: continuous for a uniform density, a node otherwise.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.is_uniform() {
            uniform01(rng) * TAU
        } else {
            self.sample_node(rng)
        }
    }

    /// `(ψ, density)` rows for export.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        (0..self.bins()).map(|j| (self.node(j), self.density[j])).collect()
    }
}

/// Binned density over `(θ_A1, θ_B1)` on an `N × N` grid, row index for
/// `θ_A1`. Same node conventions as [`AngleDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointAngleDistribution {
    n: usize,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRepr {
    n: usize,
    density: Vec<f64>,
}

impl TryFrom<JointRepr> for JointAngleDistribution {
    type Error = DynamicsError;
    fn try_from(r: JointRepr) -> Result<Self, Self::Error> {
        Self::new(r.n, r.density)
    }
}

impl From<JointAngleDistribution> for JointRepr {
    fn from(j: JointAngleDistribution) -> Self {
        JointRepr { n: j.n, density: j.density }
    }
}

impl JointAngleDistribution {
    pub fn new(n: usize, density: Vec<f64>) -> Result<Self, DynamicsError> {
        if density.len() != n * n {
            return Err(DynamicsError::InvalidDistribution(format!("expected {} cells, got {}", n * n, density.len())));
        }
        check_weights(&density, (MIN_BINS * MIN_BINS).min(n * n).max(1))?;
        if n < MIN_BINS {
            return Err(DynamicsError::InvalidDistribution(format!("{n} bins per axis, at least {MIN_BINS} required")));
        }
        let delta = TAU / n as f64;
        let total = density.iter().sum::<f64>() * delta * delta;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DynamicsError::InvalidDistribution(format!("normalisation {total} ≠ 1")));
        }
        let mut acc = 0.0;
        let cdf = density
            .iter()
            .map(|p| {
                acc += p * delta * delta;
                acc
            })
            .collect();
        Ok(Self { n, density, cdf })
    }

    pub fn from_weights(n: usize, weights: &[f64]) -> Result<Self, DynamicsError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(DynamicsError::InvalidDistribution("weights must be non-negative with positive sum".into()));
        }
        let delta = TAU / n as f64;
        Self::new(n, weights.iter().map(|w| w / (total * delta * delta)).collect())
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self, DynamicsError> {
        let delta = TAU / n as f64;
        let w: Vec<f64> = (0..n * n).map(|k| f((k / n) as f64 * delta, (k % n) as f64 * delta)).collect();
        Self::from_weights(n, &w)
    }

    pub fn product(a: &AngleDistribution, b: &AngleDistribution) -> Result<Self, DynamicsError> {
        if a.bins() != b.bins() {
            return Err(DynamicsError::InvalidDistribution("marginals must share a bin count".into()));
        }
        let n = a.bins();
        Self::new(n, (0..n * n).map(|k| a.density()[k / n] * b.density()[k % n]).collect())
    }

    /// Mass only on the diagonal `θ_A1 = θ_B1`, with diagonal profile `marginal`.
    pub fn diagonal(marginal: &AngleDistribution) -> Result<Self, DynamicsError> {
        let n = marginal.bins();
        let mut w = vec![0.0; n * n];
        for j in 0..n {
            w[j * n + j] = marginal.density()[j];
        }
        Self::from_weights(n, &w)
    }

    /// Joint density depending on `θ_A1 − θ_B1` only: `P(ψ₋) / 2π` on each
    /// anti-diagonal band.
    pub fn from_difference(psi: &AngleDistribution) -> Result<Self, DynamicsError> {
        let n = psi.bins();
        let w: Vec<f64> = (0..n * n).map(|k| psi.density()[(k / n + n - k % n) % n]).collect();
        Self::from_weights(n, &w)
    }

    pub fn bins(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        TAU / self.n as f64
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Occupied cells as `(θ_A1, θ_B1, mass)`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let delta = self.width();
        self.density
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(move |(k, p)| ((k / self.n) as f64 * delta, (k % self.n) as f64 * delta, p * delta * delta))
    }

    pub fn marginal_a(&self) -> Result<AngleDistribution, DynamicsError> {
        let n = self.n;
        AngleDistribution::from_weights(
            &(0..n).map(|i| self.density[i * n..(i + 1) * n].iter().sum()).collect::<Vec<_>>(),
        )
    }

    pub fn marginal_b(&self) -> Result<AngleDistribution, DynamicsError> {
        let n = self.n;
        AngleDistribution::from_weights(
            &(0..n).map(|j| (0..n).map(|i| self.density[i * n + j]).sum()).collect::<Vec<_>>(),
        )
    }

    /// Draws a cell node with probability equal to its mass.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let u = uniform01(rng) * self.cdf[self.cdf.len() - 1];
        let k = self.cdf.partition_point(|c| *c <= u).min(self.density.len() - 1);
        let delta = self.width();
        ((k / self.n) as f64 * delta, (k % self.n) as f64 * delta)
    }
}

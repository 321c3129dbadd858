//! The quantum-matching equation for the holonomy-difference density:
//!
//! ```text
//! ½ − cos θ_ab = ∫ P(ψ₋) cos²(θ_ab + ψ₋ + π) dψ₋
//! ```
//!
//! posed on a finite set of target angles, solved as simplex-constrained
//! least squares, and analysed exactly through the two Fourier moments of
//! `P` that it depends on.

mod chsh;
mod fourier;

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AngleDistribution, DynamicsError, MIN_BINS};

pub use chsh::{chsh_correlation, chsh_statistic, maximize_chsh, ChshAngles, ChshMaximum, ChshSearch};
pub use fourier::{fourier_feasibility, FourierReport, MomentConstraint};

/// Bin count for the unknown density. A multiple of 6, so the node `π/3`
/// needed by the `θ_ab = 2π/3` target exists.
pub const DEFAULT_INVERSE_BINS: usize = 96;
pub const MAX_ITERATIONS: usize = 100_000;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
/// RMS residual below which a target set counts as solved.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InverseError {
    #[error("the target set is empty")]
    EmptyTargets,
    #[error("non-finite target angle {0}")]
    InvalidTarget(f64),
    #[error("{bins} bins, at least {min} required")]
    TooFewBins { bins: usize, min: usize },
    #[error("regularisation must be finite and non-negative, got {0}")]
    InvalidRegularization(f64),
    #[error("no convergence after {iterations} iterations (residual {})", best.residual)]
    NoConvergence { iterations: usize, best: Box<InverseSolution> },
    #[error(transparent)]
    Distribution(#[from] DynamicsError),
}

/// Which relative angles the equation is imposed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSet {
    /// Explicit list of `θ_ab`.
    Angles { angles: Vec<f64> },
    /// `n` equally spaced angles `2πk/n`.
    Dense { n: usize },
    /// Every `θ_a − θ_b` of the configured measurement directions.
    Directions { a: Vec<f64>, b: Vec<f64> },
}

impl TargetSet {
    pub fn angles(&self) -> Vec<f64> {
        match self {
            TargetSet::Angles { angles } => angles.clone(),
            TargetSet::Dense { n } => (0..*n).map(|k| TAU * k as f64 / *n as f64).collect(),
            TargetSet::Directions { a, b } => a.iter().flat_map(|x| b.iter().map(move |y| x - y)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseProblem {
    pub targets: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Tikhonov weight on the bin masses.
    #[serde(default)]
    pub regularization: f64,
}

fn default_bins() -> usize {
    DEFAULT_INVERSE_BINS
}

/// Right-hand side of the matching equation at `θ_ab`.
pub fn target_value(theta_ab: f64) -> f64 {
    0.5 - theta_ab.cos()
}

impl InverseProblem {
    pub fn new(targets: Vec<f64>) -> Self {
        Self { targets, bins: DEFAULT_INVERSE_BINS, regularization: 0.0 }
    }

    pub fn from_set(set: &TargetSet) -> Self {
        Self::new(set.angles())
    }

    pub fn validate(&self) -> Result<(), InverseError> {
        if self.targets.is_empty() {
            return Err(InverseError::EmptyTargets);
        }
        if let Some(t) = self.targets.iter().find(|t| !t.is_finite()) {
            return Err(InverseError::InvalidTarget(*t));
        }
        if self.bins < MIN_BINS {
            return Err(InverseError::TooFewBins { bins: self.bins, min: MIN_BINS });
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(InverseError::InvalidRegularization(self.regularization));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        TAU / self.bins as f64
    }
}

/// `M p = r` with one row per target followed by the normalisation row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LinearSystem {
    pub fn targets(&self) -> usize {
        self.matrix.nrows() - 1
    }
}

pub fn assemble_system(problem: &InverseProblem) -> Result<LinearSystem, InverseError> {
    problem.validate()?;
    let (k, n) = (problem.targets.len(), problem.bins);
    let delta = problem.width();
    let matrix = DMatrix::from_fn(k + 1, n, |i, j| {
        if i == k {
            delta
        } else {
            (problem.targets[i] + j as f64 * delta + PI).cos().powi(2) * delta
        }
    });
    let rhs = DVector::from_fn(k + 1, |i, _| if i == k { 1.0 } else { target_value(problem.targets[i]) });
    Ok(LinearSystem { matrix, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseSolution {
    pub density: AngleDistribution,
    /// Root-mean-square violation of the matching equation over the targets.
    pub residual: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub projected_gradient: f64,
    pub regularization: f64,
}

/// RMS violation of the matching equation by `density` on `targets`.
pub fn residual_of(density: &AngleDistribution, targets: &[f64]) -> f64 {
    let ss: f64 =
        targets.iter().map(|t| (density.expect(|x| (t + x + PI).cos().powi(2)) - target_value(*t)).powi(2)).sum();
    (ss / targets.len() as f64).sqrt()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = y.iter().copied().collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    y.map(|x| (x - tau).max(0.0))
}

/// Minimises `½‖A w − r‖² + ½λ‖w‖²` over bin masses `w` on the simplex,
/// starting from the uniform density. Each iteration takes a projected
/// gradient step and then a step inside the current face (the support of
/// `w` with the sum fixed) towards the face minimiser; both use exact line
/// search, the face step clamped to stay non-negative. The normalisation row
/// is enforced exactly by the simplex.
pub fn solve_nnls(problem: &InverseProblem) -> Result<InverseSolution, InverseError> {
    let sys = assemble_system(problem)?;
    let (k, n) = (sys.targets(), problem.bins);
    let delta = problem.width();
    let lambda = problem.regularization;
    // Work in masses: A w = M p with w = p Δ.
    let a = sys.matrix.rows(0, k) / delta;
    let r = sys.rhs.rows(0, k).into_owned();
    let mut hess = a.transpose() * &a;
    for j in 0..n {
        hess[(j, j)] += lambda;
    }
    let lipschitz = hess.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let atr = a.transpose() * &r;
    let gradient = |w: &DVector<f64>| &hess * w - &atr;

    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let mut pg_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let g = gradient(&w);
        let d = project_simplex(&(&w - &g * step)) - &w;
        pg_norm = d.norm() / step;
        if pg_norm < GRADIENT_TOLERANCE {
            break;
        }
        iterations += 1;
        let curvature = d.dot(&(&hess * &d));
        let alpha = if curvature > 0.0 { (-g.dot(&d) / curvature).clamp(0.0, 1.0) } else { 1.0 };
        w += d * alpha;
        face_step(&hess, &gradient(&w), &mut w);
    }
    let density = AngleDistribution::from_weights(w.as_slice())?;
    let residual = residual_of(&density, &problem.targets);
    let (c2, s2) = density.moments2();
    let solution = InverseSolution {
        density,
        residual,
        c2,
        s2,
        feasible: residual < FEASIBILITY_TOLERANCE,
        iterations,
        projected_gradient: pg_norm,
        regularization: lambda,
    };
    if pg_norm >= GRADIENT_TOLERANCE && iterations >= MAX_ITERATIONS {
        return Err(InverseError::NoConvergence { iterations, best: Box::new(solution) });
    }
    Ok(solution)
}

/// Moves `w` towards the minimiser of the quadratic on its current face
/// `{v : v_j = 0 off the support, Σ v = 1}`, stopping at the first bound.
fn face_step(hess: &DMatrix<f64>, g: &DVector<f64>, w: &mut DVector<f64>) {
    let free: Vec<usize> = (0..w.len()).filter(|j| w[*j] > 0.0).collect();
    let m = free.len();
    if m < 2 {
        return;
    }
    // KKT system for min ½dᵀHd + gᵀd subject to Σ d = 0.
    let kkt = DMatrix::from_fn(m + 1, m + 1, |i, j| match (i < m, j < m) {
        (true, true) => hess[(free[i], free[j])],
        (false, false) => 0.0,
        _ => 1.0,
    });
    let rhs = DVector::from_fn(m + 1, |i, _| if i < m { -g[free[i]] } else { 0.0 });
    let Ok(sol) = kkt.svd(true, true).solve(&rhs, 1e-12) else {
        return;
    };
    let mut d = DVector::zeros(w.len());
    for (i, j) in free.iter().enumerate() {
        d[*j] = sol[i];
    }
    let slope = g.dot(&d);
    if !(slope < 0.0) {
        return;
    }
    let max_step = free.iter().filter(|j| d[**j] < 0.0).map(|j| -w[*j] / d[*j]).fold(f64::INFINITY, f64::min);
    let curvature = d.dot(&(hess * &d));
    let exact = if curvature > 0.0 { -slope / curvature } else { f64::INFINITY };
    let alpha = exact.min(max_step);
    if !alpha.is_finite() || alpha <= 0.0 {
        return;
    }
    *w += d * alpha;
    w.apply(|x| *x = x.max(0.0));
    let total = w.sum();
    *w /= total;
}

/// Solution report with the exact moment analysis alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseReport {
    pub targets: Vec<f64>,
    pub residual: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    pub feasible: bool,
    pub density_bins: Vec<f64>,
    pub iterations: usize,
    pub regularization: f64,
    pub fourier: FourierReport,
}

impl InverseReport {
    pub fn new(problem: &InverseProblem, solution: &InverseSolution) -> Result<Self, InverseError> {
        Ok(Self {
            targets: problem.targets.clone(),
            residual: solution.residual,
            c2: solution.c2,
            s2: solution.s2,
            feasible: solution.feasible,
            density_bins: solution.density.density().to_vec(),
            iterations: solution.iterations,
            regularization: solution.regularization,
            fourier: fourier_feasibility(&problem.targets)?,
        })
    }
}

/// `(ψ₋, density)` rows as CSV.
pub fn write_density_csv<W: std::io::Write>(density: &AngleDistribution, w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["psi_minus", "density"])?;
    for (x, p) in density.rows() {
        wtr.write_record([x.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

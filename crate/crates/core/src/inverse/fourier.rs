use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::{InverseError, FEASIBILITY_TOLERANCE};

/// The matching equation at one target reduced to the moments:
/// `coeff_c · C₂ + coeff_s · S₂ = rhs`, i.e. `−cos θ = ½(C₂ cos 2θ − S₂ sin 2θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentConstraint {
    pub theta_ab: f64,
    pub coeff_c: f64,
    pub coeff_s: f64,
    pub rhs: f64,
}

impl MomentConstraint {
    pub fn new(theta_ab: f64) -> Self {
        Self {
            theta_ab,
            coeff_c: 0.5 * (2.0 * theta_ab).cos(),
            coeff_s: -0.5 * (2.0 * theta_ab).sin(),
            rhs: -theta_ab.cos(),
        }
    }

    pub fn violation(&self, c2: f64, s2: f64) -> f64 {
        self.coeff_c * c2 + self.coeff_s * s2 - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierReport {
    pub constraints: Vec<MomentConstraint>,
    pub feasible: bool,
    /// Smallest RMS violation attainable by any density, over the moment
    /// disc `C₂² + S₂² ≤ 1`.
    pub lower_bound: f64,
    /// Moments attaining the bound.
    pub optimum: [f64; 2],
}

fn rms(constraints: &[MomentConstraint], x: Vector2<f64>) -> f64 {
    let ss: f64 = constraints.iter().map(|c| c.violation(x.x, x.y).powi(2)).sum();
    (ss / constraints.len() as f64).sqrt()
}

/// Least-squares analysis of the moment constraints over the unit disc: the
/// minimum-norm unconstrained solution when it lies in the disc, otherwise
/// the best point on the boundary circle.
pub fn fourier_feasibility(targets: &[f64]) -> Result<FourierReport, InverseError> {
    if targets.is_empty() {
        return Err(InverseError::EmptyTargets);
    }
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(InverseError::InvalidTarget(*t));
    }
    let constraints: Vec<MomentConstraint> = targets.iter().map(|t| MomentConstraint::new(*t)).collect();
    let mut h = Matrix2::zeros();
    let mut g = Vector2::zeros();
    for c in &constraints {
        let a = Vector2::new(c.coeff_c, c.coeff_s);
        h += a * a.transpose();
        g += a * c.rhs;
    }
    let eig = h.symmetric_eigen();
    let cutoff = 1e-12 * eig.eigenvalues.abs().max().max(1e-300);
    let mut x = Vector2::zeros();
    for i in 0..2 {
        if eig.eigenvalues[i] > cutoff {
            let u = eig.eigenvectors.column(i);
            x += u * (u.dot(&g) / eig.eigenvalues[i]);
        }
    }
    let optimum = if x.norm() <= 1.0 + 1e-12 { x / x.norm().max(1.0) } else { best_on_circle(&constraints) };
    let lower_bound = rms(&constraints, optimum);
    Ok(FourierReport {
        constraints,
        feasible: lower_bound < FEASIBILITY_TOLERANCE,
        lower_bound,
        optimum: [optimum.x, optimum.y],
    })
}

fn best_on_circle(constraints: &[MomentConstraint]) -> Vector2<f64> {
    let at = |phi: f64| Vector2::new(phi.cos(), phi.sin());
    let f = |phi: f64| rms(constraints, at(phi));
    const SCAN: usize = 3600;
    let h = TAU / SCAN as f64;
    let k = (0..SCAN).min_by(|i, j| f(*i as f64 * h).total_cmp(&f(*j as f64 * h))).unwrap_or(0);
    // Golden-section refinement inside the bracketing cells.
    let (mut lo, mut hi) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    at(0.5 * (lo + hi))
}

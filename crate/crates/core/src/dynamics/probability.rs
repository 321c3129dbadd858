use std::f64::consts::{PI, TAU};

use super::{
    AngleDistribution, DynamicsError, JointAngleDistribution, Outcome, OutcomeProbabilities, ResponseFunction,
    B_POLARIZATION_OFFSET,
};
use crate::scenario::AngleSet;

pub const DEFAULT_QUADRATURE_NODES: usize = 2048;
pub const MIN_QUADRATURE_NODES: usize = 64;
pub const DEFAULT_JOINT_BINS: usize = 256;

/// Composite Simpson rule for `∫₀^{2π} f` of a periodic `f` on `n` intervals
/// (`n` rounded up to even).
pub fn simpson_periodic(n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = TAU / n as f64;
    (0..n).map(|k| if k % 2 == 0 { 2.0 } else { 4.0 } * f(k as f64 * h)).sum::<f64>() * h / 3.0
}

/// `I_v(A, B)` for the Malus response and uniform `θ_v`.
pub fn iv_closed_form(a: Outcome, b: Outcome, theta_minus: f64) -> f64 {
    let c2 = theta_minus.cos().powi(2);
    if a == b {
        0.25 * (0.5 + c2)
    } else {
        0.25 * (0.5 + (1.0 - c2))
    }
}

/// Quantum prediction for outcome pair `(A, B)` at relative angle `θ_ab`.
pub fn quantum_target(a: Outcome, b: Outcome, theta_ab: f64) -> f64 {
    let s = (0.5 * theta_ab).sin().powi(2);
    if a == b {
        0.5 * s
    } else {
        0.5 * (1.0 - s)
    }
}

pub fn quantum_probabilities(theta_ab: f64) -> OutcomeProbabilities {
    OutcomeProbabilities::from_fn(|a, b| quantum_target(a, b, theta_ab))
}

/// Quadrature nodes and weights for `∫ P(θ_v) g(θ_v) dθ_v`, treating the
/// density as constant over each bin and applying composite Simpson inside
/// every occupied bin.
fn theta_v_rule(dist: &AngleDistribution, nodes: usize) -> Result<Vec<(f64, f64)>, DynamicsError> {
    if nodes < MIN_QUADRATURE_NODES {
        return Err(DynamicsError::ResolutionTooLow { nodes, min: MIN_QUADRATURE_NODES });
    }
    let n = dist.bins();
    let m = (nodes.div_ceil(n).max(2) + 1) & !1;
    let delta = dist.width();
    let h = delta / m as f64;
    let mut rule = Vec::new();
    for j in 0..n {
        let p = dist.density()[j];
        if p == 0.0 {
            continue;
        }
        let lo = dist.node(j) - 0.5 * delta;
        for k in 0..=m {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            rule.push((lo + k as f64 * h, p * w * h / 3.0));
        }
    }
    Ok(rule)
}

fn angle_a(theta_a: f64, theta_v: f64, hol: f64) -> f64 {
    theta_a - theta_v + hol
}

fn angle_b(theta_b: f64, theta_v: f64, hol: f64) -> f64 {
    theta_b - theta_v + B_POLARIZATION_OFFSET + hol
}

/// `∫ P(θ_v) f(A, θ_A) f(B, θ_B) dθ_v` with `θ_A2 = θ_B2 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn iv_quadrature(
    response: &ResponseFunction,
    theta_v: &AngleDistribution,
    a: Outcome,
    b: Outcome,
    theta_a: f64,
    theta_b: f64,
    theta_a1: f64,
    theta_b1: f64,
    nodes: usize,
) -> Result<f64, DynamicsError> {
    Ok(theta_v_rule(theta_v, nodes)?
        .into_iter()
        .map(|(v, w)| {
            w * response.eval(a, angle_a(theta_a, v, theta_a1)) * response.eval(b, angle_b(theta_b, v, theta_b1))
        })
        .sum())
}

/// Base angles `θ_A − θ_A2` and `θ_B − θ_B2` entering the conditioned dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeContext {
    pub base_a: f64,
    pub base_b: f64,
}

impl PeContext {
    pub fn new(theta_a: f64, theta_b: f64, theta_v: f64, theta_a1: f64, theta_b1: f64) -> Self {
        Self { base_a: angle_a(theta_a, theta_v, theta_a1), base_b: angle_b(theta_b, theta_v, theta_b1) }
    }

    pub fn from_angles(s: &AngleSet) -> Self {
        Self { base_a: s.theta_av + s.theta_a1, base_b: s.theta_bv + s.theta_b1 }
    }
}

/// One factor of the conditioned dynamics: `∫ P(θ₂) f(X, base + θ₂) dθ₂`.
pub fn pe_marginal(response: &ResponseFunction, dist: &AngleDistribution, outcome: Outcome, base: f64) -> f64 {
    dist.expect(|t| response.eval(outcome, base + t))
}

/// Conditioned dynamics: the product of the two marginal integrals.
pub fn pe_probability(
    response: &ResponseFunction,
    theta_a2: &AngleDistribution,
    theta_b2: &AngleDistribution,
    a: Outcome,
    b: Outcome,
    ctx: &PeContext,
) -> f64 {
    pe_marginal(response, theta_a2, a, ctx.base_a) * pe_marginal(response, theta_b2, b, ctx.base_b)
}

/// General dynamics for all four outcome pairs: the conditioned dynamics
/// averaged over `θ_v` and the joint `(θ_A1, θ_B1)` density.
#[allow(clippy::too_many_arguments)]
pub fn po_probabilities(
    response: &ResponseFunction,
    theta_v: &AngleDistribution,
    joint: &JointAngleDistribution,
    theta_a2: &AngleDistribution,
    theta_b2: &AngleDistribution,
    theta_a: f64,
    theta_b: f64,
    nodes: usize,
) -> Result<OutcomeProbabilities, DynamicsError> {
    let rule = theta_v_rule(theta_v, nodes)?;
    let mut p = OutcomeProbabilities::default();
    for (t1, t2, w) in joint.cells() {
        for &(v, wv) in &rule {
            let ctx = PeContext::new(theta_a, theta_b, v, t1, t2);
            let pa = pe_marginal(response, theta_a2, Outcome::Plus, ctx.base_a);
            let pb = pe_marginal(response, theta_b2, Outcome::Plus, ctx.base_b);
            let (qa, qb) = (
                pe_marginal(response, theta_a2, Outcome::Minus, ctx.base_a),
                pe_marginal(response, theta_b2, Outcome::Minus, ctx.base_b),
            );
            let k = w * wv;
            p.pp += k * pa * pb;
            p.pm += k * pa * qb;
            p.mp += k * qa * pb;
            p.mm += k * qa * qb;
        }
    }
    Ok(p)
}

#[allow(clippy::too_many_arguments)]
pub fn po_probability(
    response: &ResponseFunction,
    theta_v: &AngleDistribution,
    joint: &JointAngleDistribution,
    theta_a2: &AngleDistribution,
    theta_b2: &AngleDistribution,
    a: Outcome,
    b: Outcome,
    theta_a: f64,
    theta_b: f64,
    nodes: usize,
) -> Result<f64, DynamicsError> {
    Ok(po_probabilities(response, theta_v, joint, theta_a2, theta_b2, theta_a, theta_b, nodes)?.get(a, b))
}

/// `(p_A(+), p_B(+))` of the general dynamics.
#[allow(clippy::too_many_arguments)]
pub fn po_marginals(
    response: &ResponseFunction,
    theta_v: &AngleDistribution,
    joint: &JointAngleDistribution,
    theta_a2: &AngleDistribution,
    theta_b2: &AngleDistribution,
    theta_a: f64,
    theta_b: f64,
    nodes: usize,
) -> Result<(f64, f64), DynamicsError> {
    let p = po_probabilities(response, theta_v, joint, theta_a2, theta_b2, theta_a, theta_b, nodes)?;
    Ok((p.a_plus(), p.b_plus()))
}

/// Simplified dynamics: `∫ P(ψ₋) I_v(A, B) dψ₋` with `θ_− = θ_ab + ψ₋ + π`.
pub fn simp_probability(psi: &AngleDistribution, a: Outcome, b: Outcome, theta_ab: f64) -> f64 {
    psi.expect(|x| iv_closed_form(a, b, theta_ab + x + PI))
}

pub fn simp_probabilities(psi: &AngleDistribution, theta_ab: f64) -> OutcomeProbabilities {
    OutcomeProbabilities::from_fn(|a, b| simp_probability(psi, a, b, theta_ab))
}

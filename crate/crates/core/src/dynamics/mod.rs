//! Outcome probabilities of the two polarisation measurements, from the
//! measurement angles and distributions over the unknown holonomy angles.

mod distribution;
mod monte_carlo;
mod probability;
mod response;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distribution::{AngleDistribution, JointAngleDistribution, MIN_BINS, NORMALIZATION_TOLERANCE};
pub use monte_carlo::{mc_probability, HolonomySampler, McConfig, McEstimate, MIN_MC_SAMPLES};
pub use probability::{
    iv_closed_form, iv_quadrature, pe_marginal, pe_probability, po_marginals, po_probabilities, po_probability,
    quantum_probabilities, quantum_target, simp_probabilities, simp_probability, simpson_periodic, PeContext,
    DEFAULT_JOINT_BINS, DEFAULT_QUADRATURE_NODES, MIN_QUADRATURE_NODES,
};
pub use response::ResponseFunction;

/// Offset applied once to B's angle: B receives the polarisation `−v`.
pub const B_POLARIZATION_OFFSET: f64 = -PI;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid response function: {0}")]
    InvalidResponse(String),
    #[error("quadrature resolution {nodes} below the minimum {min}")]
    ResolutionTooLow { nodes: usize, min: usize },
    #[error("reproducible Monte Carlo needs an explicit seed")]
    SeedRequired,
    #[error("{n} Monte Carlo samples requested; at least {min} required")]
    TooFewSamples { n: u64, min: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

/// `p(A, B | i_A, i_B)` for the four outcome pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl OutcomeProbabilities {
    pub fn from_fn(mut f: impl FnMut(Outcome, Outcome) -> f64) -> Self {
        use Outcome::*;
        Self { pp: f(Plus, Plus), pm: f(Plus, Minus), mp: f(Minus, Plus), mm: f(Minus, Minus) }
    }

    pub fn get(&self, a: Outcome, b: Outcome) -> f64 {
        match (a, b) {
            (Outcome::Plus, Outcome::Plus) => self.pp,
            (Outcome::Plus, Outcome::Minus) => self.pm,
            (Outcome::Minus, Outcome::Plus) => self.mp,
            (Outcome::Minus, Outcome::Minus) => self.mm,
        }
    }

    pub fn sum(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// Correlation `E = p(++) + p(−−) − p(+−) − p(−+)`.
    pub fn correlation(&self) -> f64 {
        self.pp + self.mm - self.pm - self.mp
    }

    pub fn a_plus(&self) -> f64 {
        self.pp + self.pm
    }

    pub fn b_plus(&self) -> f64 {
        self.pp + self.mp
    }

    pub fn validate(&self, tol: f64) -> bool {
        [self.pp, self.pm, self.mp, self.mm].iter().all(|p| (-tol..=1.0 + tol).contains(p))
            && (self.sum() - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closed,
    Quad,
    Mc,
}

/// One line of a probability report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRecord {
    pub theta_ab: f64,
    #[serde(rename = "A")]
    pub a: i8,
    #[serde(rename = "B")]
    pub b: i8,
    pub method: Method,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl ProbabilityRecord {
    /// Four records, one per outcome pair.
    pub fn from_probabilities(
        theta_ab: f64,
        method: Method,
        p: &OutcomeProbabilities,
        stderr: Option<&OutcomeProbabilities>,
    ) -> Vec<Self> {
        let mut out = Vec::with_capacity(4);
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                out.push(Self {
                    theta_ab,
                    a: a.value(),
                    b: b.value(),
                    method,
                    value: p.get(a, b),
                    stderr: stderr.map(|s| s.get(a, b)),
                });
            }
        }
        out
    }
}

/// Writes records as CSV with a header row.
pub fn write_records_csv<W: std::io::Write>(records: &[ProbabilityRecord], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

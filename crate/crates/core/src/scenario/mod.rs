//! The two-observer polarisation experiment on a spacetime: construction of
//! the points, worldlines and light rays, and extraction of every angle the
//! measurement dynamics consume.

mod build;
mod extract;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Curve, Frame, GeometryError, Plane, Point};

pub use build::build_geometry;
pub use extract::{decompose_holonomy, extract_angles, AngleSet, GeometryReport, HolonomyDecomposition};

/// Tolerance for the loop-splitting check performed by [`decompose_holonomy`].
pub const ADDITIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("observer {side} could not intercept the beam: {reason}")]
    NoInterception { side: Side, reason: String },
    #[error("construction left the chart near {point:?}")]
    ChartEscape { point: Point },
    #[error("no crossing of the past light cone of the emission event along the worldline of observer {0}")]
    NoLightConeCrossing(Side),
    #[error("projection onto the measurement plane vanishes ({norm:e}); measure-zero configuration")]
    OrthogonalProjection { norm: f64 },
    #[error("loop does not close (gap {gap:e})")]
    OpenLoop { gap: f64 },
    #[error("loop splitting violated for observer {side}: defect {defect:e}")]
    AdditivityViolated { side: Side, defect: f64 },
    #[error("measurement index {index} out of range ({len} directions)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Geometry(GeometryError),
}

impl From<GeometryError> for ScenarioError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::ChartEscape { point } | GeometryError::IntegrationDiverged { point, .. } => {
                ScenarioError::ChartEscape { point }
            }
            GeometryError::OrthogonalProjection { norm } => ScenarioError::OrthogonalProjection { norm },
            GeometryError::OpenLoop { gap } => ScenarioError::OpenLoop { gap },
            other => ScenarioError::Geometry(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    /// +1 for A, −1 for B: the sign of the beam direction relative to `d`.
    pub fn sign(self) -> f64 {
        match self {
            Side::A => 1.0,
            Side::B => -1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p_o: Point,
    /// Proper time the apparatus waits before emitting.
    pub tau_e: f64,
    /// Beam direction in components of the coordinate-aligned frame at `p_o`;
    /// `None` keeps its third axis.
    #[serde(default)]
    pub d_o: Option<[f64; 3]>,
    pub dirs_a: Vec<f64>,
    pub dirs_b: Vec<f64>,
    pub observer_speed: f64,
    /// Rotation of `e_1, e_2` about the beam direction.
    #[serde(default)]
    pub frame_rotation: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    1e-2
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_4;
        Self {
            p_o: [0.0; 4],
            tau_e: 1.0,
            d_o: None,
            dirs_a: vec![0.0, FRAC_PI_4],
            dirs_b: vec![FRAC_PI_4 / 2.0, -FRAC_PI_4 / 2.0],
            observer_speed: 0.5,
            frame_rotation: 0.0,
            step: default_step(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.into()));
        if !(self.tau_e > 0.0 && self.tau_e.is_finite()) {
            return bad("tau_e must be positive and finite");
        }
        if !(self.observer_speed > 0.0 && self.observer_speed < 1.0) {
            return bad("observer_speed must lie in (0, 1)");
        }
        if self.dirs_a.is_empty() || self.dirs_b.is_empty() {
            return bad("measurement direction lists must be non-empty");
        }
        if self.dirs_a.iter().chain(&self.dirs_b).any(|a| !a.is_finite()) {
            return bad("measurement directions must be finite");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        if self.p_o.iter().any(|c| !c.is_finite()) || !self.frame_rotation.is_finite() {
            return bad("p_o and frame_rotation must be finite");
        }
        if let Some(d) = self.d_o {
            if d.iter().any(|c| !c.is_finite()) || d.iter().all(|c| *c == 0.0) {
                return bad("d_o must be a finite non-zero vector");
            }
        }
        Ok(())
    }
}

/// Pair of vectors at one point, carried together by transport. Every
/// polarisation `cos θ_v · first + sin θ_v · second` is obtained from it by
/// linearity.
pub type VectorPair = Plane;

/// Everything built for one observer.
#[derive(Debug, Clone)]
pub struct SideGeometry {
    pub side: Side,
    /// Measurement event.
    pub p_x: Point,
    /// Crossing of the worldline with the past light cone of `p_E`.
    pub p_xi: Point,
    pub gamma_ox: Curve,
    pub gamma_ex: Curve,
    pub gamma_xi_e: Curve,
    pub gamma_o_xi: Curve,
    pub gamma_xi_x: Curve,
    /// Frame carried along the worldline to the measurement event.
    pub frame_x: Frame,
    /// Frame carried along the worldline to `p_xi`.
    pub frame_xi: Frame,
    /// Emission plane carried along the beam: the plane the polarisation lives in.
    pub m_bar_x: Plane,
    /// Emission basis carried back along the null side to `p_xi`.
    pub pol_xi: VectorPair,
    /// `pol_xi` returned to `p_O` along the worldline (first loop).
    pub loop1_return: VectorPair,
    /// `pol_xi` around the second loop, back at `p_xi`.
    pub loop2_return: VectorPair,
    /// Beam polarisation basis returned to `p_O` along the worldline (whole loop).
    pub direct_return: VectorPair,
    /// Chart distance between the nominal worldline and the ray at closest approach.
    pub nominal_miss: f64,
    /// |g(v,v)| / |v|² of the connection from `p_xi` to `p_E`.
    pub xi_null_residual: f64,
    /// Parameter of `p_xi` along the worldline.
    pub xi_param: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentGeometry {
    pub config: ExperimentConfig,
    pub p_o: Point,
    pub p_e: Point,
    pub frame_o: Frame,
    pub frame_e: Frame,
    pub gamma_oe: Curve,
    /// Emission plane basis `(e_E1, e_E2)` carried back to `p_O`.
    pub pol_o: VectorPair,
    pub a: SideGeometry,
    pub b: SideGeometry,
}

impl ExperimentGeometry {
    pub fn m_o(&self) -> Plane {
        Plane::from_frame(&self.frame_o)
    }

    pub fn m_e(&self) -> Plane {
        Plane::from_frame(&self.frame_e)
    }

    pub fn d_e(&self) -> crate::geometry::TangentVector {
        self.frame_e.vector(3)
    }

    /// Emitted polarisation at angle `theta_v` from `e_E1` in `m_E`.
    pub fn v_e(&self, theta_v: f64) -> crate::geometry::TangentVector {
        self.m_e().direction(theta_v)
    }

    pub fn side(&self, side: Side) -> &SideGeometry {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }
}

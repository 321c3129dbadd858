//! Metric-driven differential geometry on a single global chart: geodesics,
//! parallel transport and loop holonomy.

mod connect;
mod curve;
mod grid;
mod integrate;
mod spacetime;
mod transport;
mod vector;

use thiserror::Error;

pub(crate) use connect::build_connecting_curve;
pub use connect::{connect_geodesic, solve_initial_velocity, squared_interval, ConnectKind, ConnectOptions};
pub use curve::{Curve, CurveKind, CurveSample};
pub use grid::GridMetric;
pub use integrate::shoot_geodesic;
pub use spacetime::{
    contract, Christoffel, ChristoffelMode, MetricModel, Spacetime, WeakField, DEFAULT_CHART_BOUND, DET_TOLERANCE,
};
pub use transport::{
    loop_holonomy_angle, parallel_transport, plane_angle, plane_angle_with, transport_around, transport_frame,
    transport_plane, CLOSURE_TOLERANCE, PROJECTION_EPSILON,
};
pub use vector::{point_distance, CausalCharacter, Frame, Plane, TangentVector, BASE_TOLERANCE};

/// Coordinate 4-tuple `(x⁰, x¹, x², x³)`.
pub type Point = [f64; 4];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate metric at {point:?} (det = {det:e})")]
    DegenerateMetric { point: Point, det: f64 },
    #[error("metric not symmetric at {point:?} (defect {defect:e})")]
    AsymmetricMetric { point: Point, defect: f64 },
    #[error("metric does not have signature (3,1) at {point:?}")]
    BadSignature { point: Point },
    #[error("point {point:?} lies outside the chart")]
    ChartEscape { point: Point },
    #[error("integration left the chart at parameter {param} (point {point:?})")]
    IntegrationDiverged { param: f64, point: Point },
    #[error("boundary-value shooting did not converge after {iterations} iterations (miss {miss:e})")]
    NoConvergence { iterations: usize, miss: f64 },
    #[error("connecting geodesic is {found:?}, expected {expected:?}")]
    WrongCausalType { expected: CausalCharacter, found: CausalCharacter },
    #[error("vector based at {found:?} but curve starts at {expected:?}")]
    BaseMismatch { expected: Point, found: Point },
    #[error("projection onto the plane is too small ({norm:e}); measure-zero configuration")]
    OrthogonalProjection { norm: f64 },
    #[error("loop does not close (gap {gap:e})")]
    OpenLoop { gap: f64 },
    #[error("invalid step {step} or length {length}")]
    BadStep { step: f64, length: f64 },
    #[error("direction must be a non-zero spatial vector")]
    BadDirection,
    #[error("invalid curve: {0}")]
    BadCurve(String),
    #[error("metric grid: {0}")]
    GridFormat(String),
}

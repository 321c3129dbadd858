use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::Serialize;

use super::{ExperimentGeometry, ScenarioError, Side, SideGeometry, VectorPair, ADDITIVITY_TOLERANCE};
use crate::angles::{wrap_2pi, wrap_pi};
use crate::geometry::{plane_angle, CurveKind, Plane, Point, Spacetime, TangentVector};

/// All angles of one run of the experiment. Directions and plane angles are
/// in `[0, 2π)`; holonomy angles and ψ₋ are signed, in `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleSet {
    /// Angle from `v_O` to `a_O` in `m_O`.
    pub theta_av: f64,
    /// Angle from `−v_O` to `b_O` in `m_O`: B receives the opposite polarisation.
    pub theta_bv: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_ab: f64,
    pub theta_v: f64,
    pub theta_a1: f64,
    pub theta_a2: f64,
    pub theta_b1: f64,
    pub theta_b2: f64,
    /// Angle from the projected polarisation to `a_A` in `m_A`.
    pub theta_at_a: f64,
    /// Angle from the projected polarisation to `b_B` in `m_B`.
    pub theta_at_b: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub psi_minus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub phi_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolonomyDecomposition {
    pub theta_a1: f64,
    pub theta_a2: f64,
    pub theta_b1: f64,
    pub theta_b2: f64,
    /// Whole-loop angles computed directly at `p_O`.
    pub theta_oea: f64,
    pub theta_oeb: f64,
    pub defect_a: f64,
    pub defect_b: f64,
}

fn combine(pair: &VectorPair, theta: f64) -> TangentVector {
    pair.direction(theta)
}

/// Per-side holonomy angles for polarisation angle `theta_v`.
struct SideAngles {
    ang_v_o: f64,
    hol1: f64,
    hol2: f64,
    whole: f64,
}

fn side_angles(
    st: &Spacetime,
    geom: &ExperimentGeometry,
    s: &SideGeometry,
    theta_v: f64,
) -> Result<SideAngles, ScenarioError> {
    let m_o = geom.m_o();
    let m_xi = Plane::from_frame(&s.frame_xi);
    let ang_v_o = plane_angle(st, &m_o, &combine(&geom.pol_o, theta_v))?;
    let ang_v_xi = plane_angle(st, &m_xi, &combine(&s.pol_xi, theta_v))?;
    // the observer reads angles against the probe, so a rotation of the probe
    // by +δ lowers the measured angle by δ
    let hol1 = -wrap_pi(plane_angle(st, &m_o, &combine(&s.loop1_return, theta_v))? - ang_v_o);
    let hol2 = -wrap_pi(plane_angle(st, &m_xi, &combine(&s.loop2_return, theta_v))? - ang_v_xi);
    let whole = -wrap_pi(plane_angle(st, &m_o, &combine(&s.direct_return, theta_v))? - ang_v_o);
    Ok(SideAngles { ang_v_o, hol1, hol2, whole })
}

/// Loop holonomy angles with the reference polarisation `e_E1` as probe.
/// The whole loop `O→E→X→O` is compared against the two halves split at the
/// light-cone crossing.
pub fn decompose_holonomy(st: &Spacetime, geom: &ExperimentGeometry) -> Result<HolonomyDecomposition, ScenarioError> {
    let a = side_angles(st, geom, &geom.a, 0.0)?;
    let b = side_angles(st, geom, &geom.b, 0.0)?;
    let defect_a = wrap_pi(a.whole - a.hol1 - a.hol2).abs();
    let defect_b = wrap_pi(b.whole - b.hol1 - b.hol2).abs();
    for (side, defect) in [(Side::A, defect_a), (Side::B, defect_b)] {
        if defect > ADDITIVITY_TOLERANCE {
            return Err(ScenarioError::AdditivityViolated { side, defect });
        }
    }
    Ok(HolonomyDecomposition {
        theta_a1: a.hol1,
        theta_a2: a.hol2,
        theta_b1: b.hol1,
        theta_b2: b.hol2,
        theta_oea: a.whole,
        theta_oeb: b.whole,
        defect_a,
        defect_b,
    })
}

/// Tilt between two planes at one point: `arccos |det G|` with `G` the
/// cross-Gram matrix of their orthonormal bases.
fn plane_tilt(st: &Spacetime, p: &Plane, q: &Plane) -> Result<f64, ScenarioError> {
    let g = |u, v| st.inner(&p.base, u, v);
    let m = Matrix2::new(
        g(&p.first, &q.first)?,
        g(&p.first, &q.second)?,
        g(&p.second, &q.first)?,
        g(&p.second, &q.second)?,
    );
    Ok(m.determinant().abs().min(1.0).acos())
}

pub fn extract_angles(
    st: &Spacetime,
    geom: &ExperimentGeometry,
    choice_a: usize,
    choice_b: usize,
    theta_v: f64,
) -> Result<AngleSet, ScenarioError> {
    let dirs_a = &geom.config.dirs_a;
    let dirs_b = &geom.config.dirs_b;
    let theta_a =
        wrap_2pi(*dirs_a.get(choice_a).ok_or(ScenarioError::IndexOutOfRange { index: choice_a, len: dirs_a.len() })?);
    let theta_b =
        wrap_2pi(*dirs_b.get(choice_b).ok_or(ScenarioError::IndexOutOfRange { index: choice_b, len: dirs_b.len() })?);
    let sa = side_angles(st, geom, &geom.a, theta_v)?;
    let sb = side_angles(st, geom, &geom.b, theta_v)?;

    let m_a = Plane::from_frame(&geom.a.frame_x);
    let m_b = Plane::from_frame(&geom.b.frame_x);
    let v_a = combine(&geom.a.m_bar_x, theta_v);
    let v_b = combine(&geom.b.m_bar_x, theta_v).scaled(-1.0);
    let theta_at_a = wrap_2pi(theta_a - plane_angle(st, &m_a, &v_a)?);
    let theta_at_b = wrap_2pi(theta_b - plane_angle(st, &m_b, &v_b)?);

    let theta_av = wrap_2pi(theta_a - sa.ang_v_o);
    let theta_bv = wrap_2pi(theta_b - sb.ang_v_o - PI);
    Ok(AngleSet {
        theta_av,
        theta_bv,
        theta_a,
        theta_b,
        theta_ab: wrap_2pi(theta_a - theta_b),
        theta_v: wrap_2pi(theta_v),
        theta_a1: sa.hol1,
        theta_a2: sa.hol2,
        theta_b1: sb.hol1,
        theta_b2: sb.hol2,
        theta_at_a,
        theta_at_b,
        phi_a: plane_tilt(st, &geom.a.m_bar_x, &m_a)?,
        phi_b: plane_tilt(st, &geom.b.m_bar_x, &m_b)?,
        psi_minus: wrap_pi(sa.hol1 - sb.hol1),
        theta_plus: wrap_2pi(theta_at_a + theta_at_b),
        theta_minus: wrap_2pi(theta_at_a - theta_at_b),
        phi_plus: wrap_2pi(theta_a + theta_b + sa.hol1 + sb.hol1 - PI),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub kind: CurveKind,
    pub length: f64,
    pub samples: usize,
    pub max_abs_norm: f64,
    pub geodesic_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideReport {
    pub p_x: Point,
    pub p_xi: Point,
    pub nominal_miss: f64,
    pub xi_null_residual: f64,
    pub xi_param: f64,
    pub frame_defect: f64,
    pub gamma_ox: CurveSummary,
    pub gamma_ex: CurveSummary,
    pub gamma_xi_e: CurveSummary,
}

/// Audit document: points, curves, holonomy angles and residuals.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub p_o: Point,
    pub p_e: Point,
    pub gamma_oe: CurveSummary,
    pub frame_defect_e: f64,
    /// |g(v_E, d_E)| for the reference polarisation.
    pub polarization_beam_overlap: f64,
    pub a: SideReport,
    pub b: SideReport,
    pub holonomy: HolonomyDecomposition,
    /// A-B spacelike separation: g(Δx, Δx) of the straight chord, positive when spacelike.
    pub ab_chord_interval: f64,
}

fn summarize(st: &Spacetime, c: &crate::geometry::Curve) -> Result<CurveSummary, ScenarioError> {
    Ok(CurveSummary {
        kind: c.kind(),
        length: c.length(),
        samples: c.samples().len(),
        max_abs_norm: c.max_abs_norm(st)?,
        geodesic_residual: c.geodesic_residual(st)?,
    })
}

fn side_report(st: &Spacetime, s: &SideGeometry) -> Result<SideReport, ScenarioError> {
    Ok(SideReport {
        p_x: s.p_x,
        p_xi: s.p_xi,
        nominal_miss: s.nominal_miss,
        xi_null_residual: s.xi_null_residual,
        xi_param: s.xi_param,
        frame_defect: s.frame_x.orthonormality_defect(st)?,
        gamma_ox: summarize(st, &s.gamma_ox)?,
        gamma_ex: summarize(st, &s.gamma_ex)?,
        gamma_xi_e: summarize(st, &s.gamma_xi_e)?,
    })
}

impl ExperimentGeometry {
    pub fn report(&self, st: &Spacetime) -> Result<GeometryReport, ScenarioError> {
        let mid: Point = std::array::from_fn(|k| 0.5 * (self.a.p_x[k] + self.b.p_x[k]));
        let dx = nalgebra::Vector4::from(std::array::from_fn::<f64, 4, _>(|k| self.a.p_x[k] - self.b.p_x[k]));
        Ok(GeometryReport {
            p_o: self.p_o,
            p_e: self.p_e,
            gamma_oe: summarize(st, &self.gamma_oe)?,
            frame_defect_e: self.frame_e.orthonormality_defect(st)?,
            polarization_beam_overlap: self.v_e(0.0).dot(st, &self.d_e())?.abs(),
            a: side_report(st, &self.a)?,
            b: side_report(st, &self.b)?,
            holonomy: decompose_holonomy(st, self)?,
            ab_chord_interval: st.inner(&mid, &dx, &dx)?,
        })
    }
}

use super::vector::{check_same_base, point_distance};
use super::{Curve, Frame, GeometryError, Plane, Spacetime, TangentVector};
use crate::angles::{wrap_2pi, wrap_pi};

/// Default threshold below which a projection onto a plane is treated as zero.
pub const PROJECTION_EPSILON: f64 = 1e-9;

/// Loop closure tolerance at the basepoint.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

pub fn parallel_transport(st: &Spacetime, v: &TangentVector, along: &Curve) -> Result<TangentVector, GeometryError> {
    check_same_base(&along.start(), &v.base)?;
    let [w] = along.transport_vectors(st, [v.components])?;
    Ok(TangentVector::from_vector(along.end(), w))
}

pub fn transport_frame(st: &Spacetime, f: &Frame, along: &Curve) -> Result<Frame, GeometryError> {
    check_same_base(&along.start(), &f.base)?;
    let e = along.transport_vectors(st, f.e)?;
    Ok(Frame { base: along.end(), e })
}

/// Transports both basis vectors of a plane.
pub fn transport_plane(st: &Spacetime, p: &Plane, along: &Curve) -> Result<Plane, GeometryError> {
    check_same_base(&along.start(), &p.base)?;
    let [first, second] = along.transport_vectors(st, [p.first, p.second])?;
    Ok(Plane { base: along.end(), first, second })
}

/// Oriented angle in `[0, 2π)` from the plane's first basis vector to the
/// g-orthogonal projection of `u` onto the plane.
pub fn plane_angle(st: &Spacetime, plane: &Plane, u: &TangentVector) -> Result<f64, GeometryError> {
    plane_angle_with(st, plane, u, PROJECTION_EPSILON)
}

pub fn plane_angle_with(st: &Spacetime, plane: &Plane, u: &TangentVector, epsilon: f64) -> Result<f64, GeometryError> {
    check_same_base(&plane.base, &u.base)?;
    let g = st.metric(&plane.base)?;
    let c = u.components.dot(&(g * plane.first));
    let s = u.components.dot(&(g * plane.second));
    let norm = c.hypot(s);
    if norm < epsilon {
        return Err(GeometryError::OrthogonalProjection { norm });
    }
    Ok(wrap_2pi(s.atan2(c)))
}

/// Rotation picked up by `probe` when carried around the closed loop, as
/// seen in `plane` at the basepoint; in `(−π, π]`.
pub fn loop_holonomy_angle(
    st: &Spacetime,
    lp: &[Curve],
    plane: &Plane,
    probe: &TangentVector,
) -> Result<f64, GeometryError> {
    let transported = transport_around(st, lp, probe)?;
    let before = plane_angle(st, plane, probe)?;
    let after = plane_angle(st, plane, &transported)?;
    Ok(wrap_pi(after - before))
}

/// Carries `probe` around a loop of curves, checking closure at every joint.
pub fn transport_around(st: &Spacetime, lp: &[Curve], probe: &TangentVector) -> Result<TangentVector, GeometryError> {
    let first = lp.first().ok_or(GeometryError::OpenLoop { gap: f64::INFINITY })?;
    let basepoint = first.start();
    check_same_base(&basepoint, &probe.base)?;
    for w in lp.windows(2) {
        let gap = point_distance(&w[0].end(), &w[1].start());
        if gap > CLOSURE_TOLERANCE {
            return Err(GeometryError::OpenLoop { gap });
        }
    }
    let gap = point_distance(&lp[lp.len() - 1].end(), &basepoint);
    if gap > CLOSURE_TOLERANCE {
        return Err(GeometryError::OpenLoop { gap });
    }
    let mut v = *probe;
    for curve in lp {
        v = parallel_transport(st, &v.rebased(curve.start()), curve)?;
    }
    Ok(v.rebased(basepoint))
}

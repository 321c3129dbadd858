//! Two-point boundary problem for geodesics: shooting on the initial
//! velocity with a damped Newton iteration.

use nalgebra::{Matrix4, Vector4};

use super::integrate::{geodesic_endpoint, shoot_geodesic};
use super::vector::point_distance;
use super::{CausalCharacter, Curve, GeometryError, Point, Spacetime, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectOptions {
    /// Steps across the affine interval `[0, 1]` while shooting.
    pub steps: usize,
    pub max_iterations: usize,
    /// Target endpoint miss (coordinate norm).
    pub tolerance: f64,
    /// Step of the returned curve, in its own parameter.
    pub output_step: f64,
    /// |g(v,v)| / |v|² below which the solution counts as null.
    pub null_tolerance: f64,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        Self { steps: 200, max_iterations: 50, tolerance: 1e-10, output_step: 5e-3, null_tolerance: 1e-7 }
    }
}

/// Requested causal type of a connecting geodesic; `Any` skips the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectKind {
    Timelike,
    Null,
    Spacelike,
    Any,
}

/// Initial velocity `v` (affine parameter on `[0, 1]`) whose geodesic from
/// `from` lands on `to`.
pub fn solve_initial_velocity(
    st: &Spacetime,
    from: &Point,
    to: &Point,
    guess: Option<Vector4<f64>>,
    opts: &ConnectOptions,
) -> Result<Vector4<f64>, GeometryError> {
    let target = Vector4::from(*to);
    let miss_of = |v: &Vector4<f64>| -> Result<Vector4<f64>, GeometryError> {
        let (end, _) = geodesic_endpoint(st, from, v, opts.steps)?;
        Ok(Vector4::from(end) - target)
    };
    let mut v = guess.unwrap_or_else(|| target - Vector4::from(*from));
    let mut f = miss_of(&v)?;
    for _ in 0..opts.max_iterations {
        if f.norm() < opts.tolerance {
            return Ok(v);
        }
        let mut jac = Matrix4::zeros();
        for k in 0..4 {
            let dv = 1e-7 * v.norm().max(1.0);
            let mut vp = v;
            vp[k] += dv;
            let fp = miss_of(&vp)?;
            jac.set_column(k, &((fp - f) / dv));
        }
        let delta = jac.lu().solve(&(-f)).ok_or(GeometryError::NoConvergence { iterations: 0, miss: f.norm() })?;
        // backtracking on the miss norm
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = v + delta * t;
            if let Ok(ft) = miss_of(&trial) {
                if ft.norm() < f.norm() {
                    v = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.norm() < opts.tolerance.max(1e-9) {
        return Ok(v);
    }
    Err(GeometryError::NoConvergence { iterations: opts.max_iterations, miss: f.norm() })
}

/// Geodesic from `from` to `to` of the requested causal type. Timelike and
/// spacelike results are parameterised by proper length; null results keep
/// the affine parameter on `[0, 1]`.
pub fn connect_geodesic(
    st: &Spacetime,
    from: &Point,
    to: &Point,
    kind: ConnectKind,
    opts: &ConnectOptions,
) -> Result<Curve, GeometryError> {
    let v = solve_initial_velocity(st, from, to, None, opts)?;
    build_connecting_curve(st, from, to, v, kind, opts)
}

pub(crate) fn build_connecting_curve(
    st: &Spacetime,
    from: &Point,
    to: &Point,
    v: Vector4<f64>,
    kind: ConnectKind,
    opts: &ConnectOptions,
) -> Result<Curve, GeometryError> {
    let n = st.inner(from, &v, &v)?;
    let scale = v.norm_squared().max(f64::MIN_POSITIVE);
    let found = if n.abs() <= opts.null_tolerance * scale {
        CausalCharacter::Null
    } else if n < 0.0 {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Spacelike
    };
    let wanted = match kind {
        ConnectKind::Timelike => Some(CausalCharacter::Timelike),
        ConnectKind::Null => Some(CausalCharacter::Null),
        ConnectKind::Spacelike => Some(CausalCharacter::Spacelike),
        ConnectKind::Any => None,
    };
    if let Some(w) = wanted {
        if w != found {
            return Err(GeometryError::WrongCausalType { expected: w, found });
        }
    }
    let (v0, length) = match found {
        CausalCharacter::Null => (v, 1.0),
        _ => {
            let len = n.abs().sqrt();
            (v / len, len)
        }
    };
    let steps = ((length / opts.output_step).ceil() as usize).max(opts.steps);
    let curve = shoot_geodesic(st, &TangentVector::from_vector(*from, v0), length, length / steps as f64)?;
    let miss = point_distance(&curve.end(), to);
    if miss > 1e-6 {
        return Err(GeometryError::NoConvergence { iterations: opts.max_iterations, miss });
    }
    Ok(curve)
}

/// Signed world-function proxy `g(v, v)` of the connecting geodesic with
/// affine parameter on `[0, 1]`: negative for timelike separation, zero on
/// the light cone.
pub fn squared_interval(
    st: &Spacetime,
    from: &Point,
    to: &Point,
    guess: Option<Vector4<f64>>,
    opts: &ConnectOptions,
) -> Result<(f64, Vector4<f64>), GeometryError> {
    let v = solve_initial_velocity(st, from, to, guess, opts)?;
    Ok((st.inner(from, &v, &v)?, v))
}

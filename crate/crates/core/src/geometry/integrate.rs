//! Classical fixed-step RK4 for the geodesic equation, optionally carrying
//! parallel-transported vectors along.

use nalgebra::Vector4;

use super::curve::{Curve, CurveKind, CurveSample};
use super::{contract, GeometryError, Point, Spacetime, TangentVector};

type State<const N: usize> = (Point, Vector4<f64>, [Vector4<f64>; N]);
type Rates<const N: usize> = (Vector4<f64>, Vector4<f64>, [Vector4<f64>; N]);

fn derivative<const N: usize>(
    st: &Spacetime,
    x: &Point,
    u: &Vector4<f64>,
    ws: &[Vector4<f64>; N],
) -> Result<Rates<N>, GeometryError> {
    let gamma = st.christoffel(x)?;
    let du = -contract(&gamma, u, u);
    let dw = std::array::from_fn(|k| -contract(&gamma, u, &ws[k]));
    Ok((*u, du, dw))
}

fn advance<const N: usize>(
    x: &Point,
    u: &Vector4<f64>,
    ws: &[Vector4<f64>; N],
    d: &(Vector4<f64>, Vector4<f64>, [Vector4<f64>; N]),
    h: f64,
) -> State<N> {
    let xn = std::array::from_fn(|k| x[k] + h * d.0[k]);
    (xn, u + d.1 * h, std::array::from_fn(|k| ws[k] + d.2[k] * h))
}

/// One RK4 step of the coupled geodesic + transport system. The position and
/// velocity updates do not depend on `N`, so a geodesic integrated with or
/// without passengers follows bit-identical samples.
pub(crate) fn rk4_step<const N: usize>(
    st: &Spacetime,
    x: Point,
    u: Vector4<f64>,
    ws: [Vector4<f64>; N],
    h: f64,
) -> Result<State<N>, GeometryError> {
    let k1 = derivative(st, &x, &u, &ws)?;
    let s2 = advance(&x, &u, &ws, &k1, 0.5 * h);
    let k2 = derivative(st, &s2.0, &s2.1, &s2.2)?;
    let s3 = advance(&x, &u, &ws, &k2, 0.5 * h);
    let k3 = derivative(st, &s3.0, &s3.1, &s3.2)?;
    let s4 = advance(&x, &u, &ws, &k3, h);
    let k4 = derivative(st, &s4.0, &s4.1, &s4.2)?;
    let w6 = h / 6.0;
    let xn = std::array::from_fn(|k| x[k] + w6 * (k1.0[k] + 2.0 * k2.0[k] + 2.0 * k3.0[k] + k4.0[k]));
    let un = u + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * w6;
    let wn = std::array::from_fn(|k| ws[k] + (k1.2[k] + k2.2[k] * 2.0 + k3.2[k] * 2.0 + k4.2[k]) * w6);
    if xn.iter().any(|c: &f64| !c.is_finite()) || un.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::IntegrationDiverged { param: f64::NAN, point: x });
    }
    Ok((xn, un, wn))
}

/// Chart escapes during an integration are reported as divergence at `param`.
pub(crate) fn to_divergence(e: GeometryError, param: f64) -> GeometryError {
    match e {
        GeometryError::ChartEscape { point } => GeometryError::IntegrationDiverged { param, point },
        GeometryError::IntegrationDiverged { point, .. } => GeometryError::IntegrationDiverged { param, point },
        other => other,
    }
}

/// Step schedule covering `[0, length]`: full steps, then one shorter step.
pub(crate) fn schedule(length: f64, step: f64) -> impl Iterator<Item = (f64, f64)> {
    let n_full = ((length / step) * (1.0 + 1e-12)).floor() as usize;
    let rem = length - n_full as f64 * step;
    let tail = if rem > 1e-12 * length.max(1.0) { Some((n_full as f64 * step, rem)) } else { None };
    (0..n_full).map(move |i| (i as f64 * step, step)).chain(tail)
}

/// Integrates the geodesic with initial velocity `v0` for affine length
/// `length`, recording every step.
pub fn shoot_geodesic(st: &Spacetime, v0: &TangentVector, length: f64, step: f64) -> Result<Curve, GeometryError> {
    if !(step > 0.0) || !(length > 0.0) {
        return Err(GeometryError::BadStep { step, length });
    }
    let character = v0.character(st)?;
    let mut x = v0.base;
    let mut u = v0.components;
    let mut samples = vec![CurveSample { param: 0.0, point: x, tangent: u }];
    let mut end = 0.0;
    for (t, h) in schedule(length, step) {
        let (xn, un, _) = rk4_step::<0>(st, x, u, [], h).map_err(|e| to_divergence(e, t))?;
        if !st.in_chart(&xn) {
            return Err(GeometryError::IntegrationDiverged { param: t + h, point: xn });
        }
        x = xn;
        u = un;
        end = t + h;
        samples.push(CurveSample { param: end, point: x, tangent: u });
    }
    // pin the last parameter to `length` exactly
    if let Some(last) = samples.last_mut() {
        last.param = length.max(end);
    }
    Ok(Curve::geodesic(CurveKind::geodesic(character), samples, step))
}

/// Endpoint of the geodesic `x(λ)` at `λ = 1` after `steps` equal steps.
pub(crate) fn geodesic_endpoint(
    st: &Spacetime,
    start: &Point,
    v0: &Vector4<f64>,
    steps: usize,
) -> Result<(Point, Vector4<f64>), GeometryError> {
    let h = 1.0 / steps as f64;
    let mut x = *start;
    let mut u = *v0;
    for i in 0..steps {
        let (xn, un, _) = rk4_step::<0>(st, x, u, [], h).map_err(|e| to_divergence(e, i as f64 * h))?;
        x = xn;
        u = un;
    }
    Ok((x, u))
}

use nalgebra::{Matrix2, Vector2, Vector4};

use super::{ExperimentConfig, ExperimentGeometry, ScenarioError, Side, SideGeometry, VectorPair};
use crate::geometry::{
    build_connecting_curve, connect_geodesic, point_distance, shoot_geodesic, squared_interval, transport_frame,
    transport_plane, ConnectKind, ConnectOptions, Curve, Frame, GeometryError, Plane, Point, Spacetime, TangentVector,
};

/// Coarse samples of the worldline scanned for the light-cone crossing.
const CROSSING_SCAN: usize = 24;

pub fn build_geometry(st: &Spacetime, config: &ExperimentConfig) -> Result<ExperimentGeometry, ScenarioError> {
    config.validate()?;
    if !st.in_chart(&config.p_o) {
        return Err(ScenarioError::ChartEscape { point: config.p_o });
    }
    let mut frame_o = Frame::coordinate_aligned(st, config.p_o)?;
    if let Some(d) = config.d_o {
        frame_o = frame_o.aligned_to(d)?;
    }
    let frame_o = frame_o.rotated_about_e3(config.frame_rotation);

    let gamma_oe = shoot_geodesic(st, &frame_o.vector(0), config.tau_e, config.step)?;
    let frame_e = transport_frame(st, &frame_o, &gamma_oe)?;
    let p_e = gamma_oe.end();
    let m_e = Plane::from_frame(&frame_e);
    let pol_o = transport_plane(st, &m_e, &gamma_oe.reversed())?;

    let opts = ConnectOptions { output_step: config.step, ..Default::default() };
    let a = build_side(st, config, &frame_o, &frame_e, &m_e, Side::A, &opts)?;
    let b = build_side(st, config, &frame_o, &frame_e, &m_e, Side::B, &opts)?;
    Ok(ExperimentGeometry { config: config.clone(), p_o: config.p_o, p_e, frame_o, frame_e, gamma_oe, pol_o, a, b })
}

fn build_side(
    st: &Spacetime,
    config: &ExperimentConfig,
    frame_o: &Frame,
    frame_e: &Frame,
    m_e: &Plane,
    side: Side,
    opts: &ConnectOptions,
) -> Result<SideGeometry, ScenarioError> {
    let sign = side.sign();
    let v = config.observer_speed;
    let gamma = 1.0 / (1.0 - v * v).sqrt();
    let p_o = frame_o.base;
    let p_e = frame_e.base;

    // nominal plan: geodesic setting out along ±d_O, and the emitted ray
    let u = TangentVector::from_vector(p_o, (frame_o.e[0] + frame_o.e[3] * (sign * v)) * gamma);
    let k = TangentVector::from_vector(p_e, frame_e.e[0] + frame_e.e[3] * sign);
    // flat-space meeting point, doubled for headroom
    let t_meet = config.tau_e / (1.0 - v);
    let wl = shoot_geodesic(st, &u, 2.0 * t_meet / gamma + 1.0, config.step)?;
    let ray = shoot_geodesic(st, &k, 2.0 * (t_meet - config.tau_e) + 1.0, config.step)?;
    let (lambda, _, nominal_miss) = closest_approach(&ray, &wl, side)?;

    let gamma_ex = shoot_geodesic(st, &k, lambda, config.step)?;
    let p_x = gamma_ex.end();
    let gamma_ox = connect_geodesic(st, &p_o, &p_x, ConnectKind::Timelike, opts).map_err(|e| match e {
        GeometryError::NoConvergence { miss, .. } => {
            ScenarioError::NoInterception { side, reason: format!("path correction did not converge (miss {miss:e})") }
        }
        GeometryError::WrongCausalType { found, .. } => ScenarioError::NoInterception {
            side,
            reason: format!("interception point is {found:?}-separated from p_O"),
        },
        other => other.into(),
    })?;

    let (xi_param, p_xi, v_xi) = light_cone_crossing(st, &gamma_ox, &p_e, side, opts)?;
    let gamma_xi_e = build_connecting_curve(st, &p_xi, &p_e, v_xi, ConnectKind::Null, opts)?;
    let n = st.inner(&p_xi, &v_xi, &v_xi)?;
    let xi_null_residual = n.abs() / v_xi.norm_squared();
    let gamma_o_xi = connect_geodesic(st, &p_o, &p_xi, ConnectKind::Timelike, opts)?;
    let gamma_xi_x = connect_geodesic(st, &p_xi, &p_x, ConnectKind::Timelike, opts)?;

    let frame_x = transport_frame(st, frame_o, &gamma_ox)?;
    let frame_xi = transport_frame(st, frame_o, &gamma_o_xi)?;
    let m_bar_x = transport_plane(st, m_e, &gamma_ex)?;
    let pol_xi = transport_plane(st, m_e, &gamma_xi_e.reversed())?;
    let loop1_return = transport_plane(st, &pol_xi, &gamma_o_xi.reversed())?;
    let loop2_return = carry(st, &pol_xi, &[gamma_xi_e.clone(), gamma_ex.clone(), gamma_xi_x.reversed()])?;
    let direct_return = transport_plane(st, &m_bar_x, &gamma_ox.reversed())?;

    Ok(SideGeometry {
        side,
        p_x,
        p_xi,
        gamma_ox,
        gamma_ex,
        gamma_xi_e,
        gamma_o_xi,
        gamma_xi_x,
        frame_x,
        frame_xi,
        m_bar_x,
        pol_xi,
        loop1_return,
        loop2_return,
        direct_return,
        nominal_miss,
        xi_null_residual,
        xi_param,
    })
}

/// Carries a vector pair along consecutive curves, rebasing at each joint.
fn carry(st: &Spacetime, pair: &VectorPair, path: &[Curve]) -> Result<VectorPair, GeometryError> {
    let mut p = *pair;
    for c in path {
        let gap = point_distance(&p.base, &c.start());
        if gap > crate::geometry::CLOSURE_TOLERANCE {
            return Err(GeometryError::OpenLoop { gap });
        }
        p.base = c.start();
        p = transport_plane(st, &p, c)?;
    }
    Ok(p)
}

/// Ray parameter, worldline parameter and chart distance at the closest
/// approach of the ray to the worldline.
fn closest_approach(ray: &Curve, wl: &Curve, side: Side) -> Result<(f64, f64, f64), ScenarioError> {
    let dist2 = |a: &Point, b: &Point| (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
    let (mut best, mut bi, mut bj) = (f64::INFINITY, 0, 0);
    for (i, r) in ray.samples().iter().enumerate() {
        for (j, w) in wl.samples().iter().enumerate() {
            let d = dist2(&r.point, &w.point);
            if d < best {
                (best, bi, bj) = (d, i, j);
            }
        }
    }
    let (mut l, mut s) = (ray.samples()[bi].param, wl.samples()[bj].param);
    // Gauss-Newton on |X(λ) − Y(s)|²
    for _ in 0..30 {
        let (x, dx) = ray.evaluate(l);
        let (y, dy) = wl.evaluate(s);
        let r = Vector4::from(x) - Vector4::from(y);
        let jtj = Matrix2::new(dx.dot(&dx), -dx.dot(&dy), -dx.dot(&dy), dy.dot(&dy));
        let jtr = Vector2::new(dx.dot(&r), -dy.dot(&r));
        let Some(delta) = jtj.lu().solve(&(-jtr)) else { break };
        l = (l + delta[0]).clamp(0.0, ray.length());
        s = (s + delta[1]).clamp(0.0, wl.length());
        if delta.norm() < 1e-14 {
            break;
        }
    }
    let miss = point_distance(&ray.evaluate(l).0, &wl.evaluate(s).0);
    let margin = ray.step();
    if l <= margin || l >= ray.length() - margin || s >= wl.length() - margin {
        return Err(ScenarioError::NoInterception {
            side,
            reason: "closest approach of ray and planned worldline lies at the end of the search range".into(),
        });
    }
    if miss > 0.5 * l {
        return Err(ScenarioError::NoInterception {
            side,
            reason: format!("planned worldline misses the beam by {miss:.3e}"),
        });
    }
    Ok((l, s, miss))
}

/// First point where the worldline crosses from the chronological past of
/// `p_e` onto its past light cone. Returns the worldline parameter, the point
/// and the affine initial velocity of the null connection to `p_e`.
fn light_cone_crossing(
    st: &Spacetime,
    worldline: &Curve,
    p_e: &Point,
    side: Side,
    opts: &ConnectOptions,
) -> Result<(f64, Point, Vector4<f64>), ScenarioError> {
    let len = worldline.length();
    let sigma = |s: f64, guess: Option<Vector4<f64>>| -> Result<(f64, Vector4<f64>, Point), ScenarioError> {
        let p = worldline.evaluate(s).0;
        let (g, v) = squared_interval(st, &p, p_e, guess, opts)?;
        Ok((g, v, p))
    };
    let mut prev = sigma(0.0, None)?;
    let mut prev_s = 0.0;
    let mut bracket = None;
    for k in 1..CROSSING_SCAN {
        let s = len * k as f64 / CROSSING_SCAN as f64;
        let cur = sigma(s, Some(prev.1))?;
        if prev.0 < 0.0 && cur.0 >= 0.0 {
            bracket = Some(((prev_s, prev), (s, cur)));
            break;
        }
        prev = cur;
        prev_s = s;
    }
    let ((mut lo, mut flo), (mut hi, mut fhi)) = bracket.ok_or(ScenarioError::NoLightConeCrossing(side))?;
    if fhi.0 == 0.0 {
        return Ok((hi, fhi.2, fhi.1));
    }
    // Illinois false position
    let mut last_side = 0i8;
    for _ in 0..100 {
        let s = (lo * fhi.0 - hi * flo.0) / (fhi.0 - flo.0);
        let cur = sigma(s, Some(if s - lo < hi - s { flo.1 } else { fhi.1 }))?;
        if cur.0.abs() < 1e-13 || hi - lo < 1e-14 {
            return Ok((s, cur.2, cur.1));
        }
        if cur.0 < 0.0 {
            (lo, flo) = (s, cur);
            if last_side == -1 {
                fhi.0 *= 0.5;
            }
            last_side = -1;
        } else {
            (hi, fhi) = (s, cur);
            if last_side == 1 {
                flo.0 *= 0.5;
            }
            last_side = 1;
        }
    }
    let s = 0.5 * (lo + hi);
    let cur = sigma(s, Some(flo.1))?;
    Ok((s, cur.2, cur.1))
}

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use curved_chsh::angles::wrap_pi;
use curved_chsh::geometry::*;
use nalgebra::Vector4;
use proptest::prelude::*;

const ORIGIN: Point = [0.0; 4];

fn weak_field() -> Spacetime {
    Spacetime::weak_field(WeakField { mass: 0.05, softening: 0.5, center: [1.0, 0.5, 0.3] })
}

/// Unit vector in R³ for sphere coordinates (θ, φ).
fn embed(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Solid angle of a spherical triangle (Van Oosterom–Strackee), independent
/// of any transport computation.
fn solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let cross = [b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]];
    let num = dot3(&a, &cross).abs();
    let den = 1.0 + dot3(&a, &b) + dot3(&b, &c) + dot3(&c, &a);
    2.0 * num.atan2(den)
}

/// Exact initial velocity (coordinate components) and arc length of the
/// great circle from `p` to `q`, both given as (θ, φ).
fn great_circle_data(p: (f64, f64), q: (f64, f64)) -> (Vector4<f64>, f64) {
    let (a, b) = (embed(p.0, p.1), embed(q.0, q.1));
    let c = dot3(&a, &b);
    let mut t = [b[0] - c * a[0], b[1] - c * a[1], b[2] - c * a[2]];
    let n = dot3(&t, &t).sqrt();
    t.iter_mut().for_each(|x| *x /= n);
    let (th, ph) = p;
    let e_theta = [th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin()];
    let e_phi = [-ph.sin(), ph.cos(), 0.0];
    let v = Vector4::new(0.0, dot3(&t, &e_theta), dot3(&t, &e_phi) / th.sin(), 0.0);
    (v, c.acos())
}

fn sphere_point(v: (f64, f64)) -> Point {
    [0.0, v.0, v.1, 0.0]
}

fn tangent_plane(theta: f64, base: Point) -> Plane {
    Plane::new(
        TangentVector::new(base, [0.0, 1.0, 0.0, 0.0]),
        TangentVector::new(base, [0.0, 0.0, 1.0 / theta.sin(), 0.0]),
    )
    .unwrap()
}

/// Right spherical triangle with equal legs `leg` and right angle at (π/2, 0);
/// excess satisfies tan(E/2) = tan²(leg/2).
fn right_triangle(excess: f64) -> [(f64, f64); 3] {
    let leg = 2.0 * (excess / 2.0).tan().sqrt().atan();
    [(FRAC_PI_2, 0.0), (FRAC_PI_2, leg), (FRAC_PI_2 - leg, 0.0)]
}

fn shot_triangle(st: &Spacetime, verts: &[(f64, f64); 3], step: f64) -> Vec<Curve> {
    (0..3)
        .map(|i| {
            let (p, q) = (verts[i], verts[(i + 1) % 3]);
            let (v, len) = great_circle_data(p, q);
            shoot_geodesic(st, &TangentVector::from_vector(sphere_point(p), v), len, step).unwrap()
        })
        .collect()
}

#[test]
fn flat_timelike_geodesic_is_straight() {
    let st = Spacetime::minkowski();
    let c = shoot_geodesic(&st, &TangentVector::new(ORIGIN, [1.0, 0.0, 0.0, 0.0]), 1.0, 1e-3).unwrap();
    assert_eq!(c.kind(), CurveKind::TimelikeGeodesic);
    assert!(point_distance(&c.end(), &[1.0, 0.0, 0.0, 0.0]) < 1e-14);
}

#[test]
fn flat_null_geodesic_stays_null() {
    let st = Spacetime::minkowski();
    let k = 1.0 / 2f64.sqrt();
    let c = shoot_geodesic(&st, &TangentVector::new(ORIGIN, [k, k, 0.0, 0.0]), 1.0, 1e-3).unwrap();
    assert_eq!(c.kind(), CurveKind::NullGeodesic);
    assert!(c.max_abs_norm(&st).unwrap() < 1e-15);
}

#[test]
fn great_circle_closes_after_two_pi() {
    let st = Spacetime::product_sphere(1.0);
    let start = [0.0, FRAC_PI_2, 0.0, 0.0];
    // tilted great circle through the equator point, avoiding the poles
    let v = TangentVector::new(start, [0.0, 0.6, 0.8, 0.0]);
    let c = shoot_geodesic(&st, &v, TAU, 1e-3).unwrap();
    // φ winds once, so compare positions on the embedded sphere
    let (a, b) = (embed(start[1], start[2]), embed(c.end()[1], c.end()[2]));
    let miss = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    assert!(miss < 1e-6, "miss {miss}");
    assert!((c.end()[2] - TAU).abs() < 1e-6);
}

#[test]
fn weak_field_tangent_norm_conserved() {
    let st = weak_field();
    let frame = Frame::coordinate_aligned(&st, ORIGIN).unwrap();
    let gamma = 1.0 / (1.0f64 - 0.25).sqrt();
    let u = TangentVector::from_vector(ORIGIN, (frame.e[0] + frame.e[3] * 0.5) * gamma);
    let c = shoot_geodesic(&st, &u, 10.0, 1e-3).unwrap();
    let n0 = u.norm_squared(&st).unwrap();
    let n1 = c.end_tangent().norm_squared(&st).unwrap();
    assert!(((n1 - n0) / n0).abs() < 1e-8);
    assert!((n0 + 1.0).abs() < 1e-12);
    assert!(c.geodesic_residual(&st).unwrap() < 1e-5);
}

#[test]
fn chart_escape_reported_as_divergence() {
    let st = Spacetime::minkowski().with_chart_bound(2.0);
    let err = shoot_geodesic(&st, &TangentVector::new(ORIGIN, [1.0, 0.0, 0.0, 0.0]), 5.0, 0.01).unwrap_err();
    assert!(matches!(err, GeometryError::IntegrationDiverged { .. }));
}

#[test]
fn connect_flat_null_and_timelike() {
    let st = Spacetime::minkowski();
    let opts = ConnectOptions::default();
    let null = connect_geodesic(&st, &ORIGIN, &[1.0, 1.0, 0.0, 0.0], ConnectKind::Null, &opts).unwrap();
    let t = null.start_tangent().components;
    assert!((t[0] - t[1]).abs() < 1e-9 && t[2].abs() < 1e-12 && t[3].abs() < 1e-12);
    let timelike = connect_geodesic(&st, &ORIGIN, &[2.0, 1.0, 0.0, 0.0], ConnectKind::Timelike, &opts).unwrap();
    assert!((timelike.length() - 3f64.sqrt()).abs() < 1e-9);
    let wrong = connect_geodesic(&st, &ORIGIN, &[1.0, 2.0, 0.0, 0.0], ConnectKind::Timelike, &opts);
    assert!(matches!(wrong, Err(GeometryError::WrongCausalType { .. })));
}

#[test]
fn connect_weak_field_radial_pair() {
    let st = weak_field();
    let opts = ConnectOptions::default();
    let from = [0.0, 0.2, 0.1, 0.0];
    let to = [1.5, 0.8, 0.4, 0.3];
    let c = connect_geodesic(&st, &from, &to, ConnectKind::Timelike, &opts).unwrap();
    assert!(point_distance(&c.end(), &to) < 1e-6);
    assert!(c.geodesic_residual(&st).unwrap() < 1e-4);
}

#[test]
fn flat_transport_is_identity() {
    let st = Spacetime::minkowski();
    let c = connect_geodesic(&st, &ORIGIN, &[2.0, 0.5, -0.3, 0.1], ConnectKind::Timelike, &ConnectOptions::default())
        .unwrap();
    let v = TangentVector::new(ORIGIN, [0.3, 1.0, -2.0, 0.5]);
    let w = parallel_transport(&st, &v, &c).unwrap();
    assert_eq!(w.components, v.components);
}

#[test]
fn transport_base_mismatch() {
    let st = Spacetime::minkowski();
    let c = shoot_geodesic(&st, &TangentVector::new(ORIGIN, [1.0, 0.0, 0.0, 0.0]), 1.0, 0.1).unwrap();
    let v = TangentVector::new([0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]);
    assert!(matches!(parallel_transport(&st, &v, &c), Err(GeometryError::BaseMismatch { .. })));
}

#[test]
fn latitude_transport_matches_enclosed_cap() {
    // latitude circle is not a geodesic: sampled general curve
    let st = Spacetime::product_sphere(1.0);
    let theta0: f64 = 1.0;
    let n = 20_000;
    let samples: Vec<CurveSample> = (0..=n)
        .map(|i| {
            let phi = FRAC_PI_2 * i as f64 / n as f64;
            CurveSample { param: phi, point: [0.0, theta0, phi, 0.0], tangent: Vector4::new(0.0, 0.0, 1.0, 0.0) }
        })
        .collect();
    let quarter = Curve::from_samples(samples).unwrap();
    let start = quarter.start();
    let v = TangentVector::new(start, [0.0, 1.0, 0.0, 0.0]);
    let w = parallel_transport(&st, &v, &quarter).unwrap();
    let before = plane_angle(&st, &tangent_plane(theta0, start), &v).unwrap();
    let after = plane_angle(&st, &tangent_plane(theta0, quarter.end()), &w).unwrap();
    // four quarters make the full loop, whose rotation is the cap area 2π(1 − cos θ₀)
    let quarter_rotation = wrap_pi(after - before);
    assert!((quarter_rotation + theta0.cos() * FRAC_PI_2).abs() < 1e-9, "{quarter_rotation}");
    let cap = TAU * (1.0 - theta0.cos());
    assert!((wrap_pi(4.0 * quarter_rotation) - wrap_pi(cap)).abs() < 1e-8);
}

#[test]
fn transport_is_reversible() {
    let st = weak_field();
    let c = connect_geodesic(&st, &ORIGIN, &[1.5, 0.3, -0.2, 0.6], ConnectKind::Timelike, &ConnectOptions::default())
        .unwrap();
    let v = TangentVector::new(ORIGIN, [0.2, 1.0, 0.4, -0.7]);
    let w = parallel_transport(&st, &v, &c).unwrap();
    let back = parallel_transport(&st, &w, &c.reversed()).unwrap();
    assert!((back.components - v.components).norm() < 1e-8);
}

#[test]
fn frame_transport_preserves_orthonormality_and_composes() {
    let st = weak_field();
    let f = Frame::coordinate_aligned(&st, ORIGIN).unwrap();
    let opts = ConnectOptions::default();
    let mid = [0.8, 0.2, -0.1, 0.3];
    let end = [1.6, 0.3, -0.1, 0.7];
    let a = connect_geodesic(&st, &ORIGIN, &mid, ConnectKind::Timelike, &opts).unwrap();
    let b = connect_geodesic(&st, &a.end(), &end, ConnectKind::Timelike, &opts).unwrap();
    let fa = transport_frame(&st, &f, &a).unwrap();
    let fab = transport_frame(&st, &fa, &b).unwrap();
    let before = f.orthonormality_defect(&st).unwrap();
    let after = fab.orthonormality_defect(&st).unwrap();
    assert!((after - before).abs() < 1e-7);
    let whole = transport_frame(&st, &f, &a.concat(&b).unwrap()).unwrap();
    for k in 0..4 {
        assert!((whole.e[k] - fab.e[k]).norm() < 1e-8);
    }
    let flat = Spacetime::minkowski();
    let ff = Frame::coordinate_aligned(&flat, ORIGIN).unwrap();
    let cf = connect_geodesic(&flat, &ORIGIN, &end, ConnectKind::Timelike, &opts).unwrap();
    assert_eq!(transport_frame(&flat, &ff, &cf).unwrap().e, ff.e);
}

#[test]
fn plane_angle_examples() {
    let st = weak_field();
    let f = Frame::coordinate_aligned(&st, ORIGIN).unwrap();
    let plane = Plane::from_frame(&f);
    assert!(plane_angle(&st, &plane, &f.vector(1)).unwrap().abs() < 1e-15);
    assert!((plane_angle(&st, &plane, &f.vector(2)).unwrap() - FRAC_PI_2).abs() < 1e-14);
    let t: f64 = 1.234;
    let u = TangentVector::from_vector(ORIGIN, f.e[1] * t.cos() + f.e[2] * t.sin() + f.e[3] * 0.5);
    assert!((plane_angle(&st, &plane, &u).unwrap() - t).abs() < 1e-10);
    let normal = f.vector(3);
    assert!(matches!(plane_angle(&st, &plane, &normal), Err(GeometryError::OrthogonalProjection { .. })));
}

#[test]
fn flat_loop_has_no_holonomy() {
    let st = Spacetime::minkowski();
    let opts = ConnectOptions::default();
    let (p, q, r) = (ORIGIN, [1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 1.0]);
    let lp = vec![
        connect_geodesic(&st, &p, &q, ConnectKind::Any, &opts).unwrap(),
        connect_geodesic(&st, &q, &r, ConnectKind::Any, &opts).unwrap(),
        connect_geodesic(&st, &r, &p, ConnectKind::Any, &opts).unwrap(),
    ];
    let f = Frame::coordinate_aligned(&st, p).unwrap();
    let a = loop_holonomy_angle(&st, &lp, &Plane::from_frame(&f), &f.vector(1)).unwrap();
    assert!(a.abs() < 1e-9);
}

#[test]
fn open_loop_rejected() {
    let st = Spacetime::minkowski();
    let opts = ConnectOptions::default();
    let lp = vec![connect_geodesic(&st, &ORIGIN, &[1.0, 0.0, 0.0, 0.0], ConnectKind::Any, &opts).unwrap()];
    let f = Frame::coordinate_aligned(&st, ORIGIN).unwrap();
    let err = loop_holonomy_angle(&st, &lp, &Plane::from_frame(&f), &f.vector(1)).unwrap_err();
    assert!(matches!(err, GeometryError::OpenLoop { .. }));
}

#[test]
fn sphere_triangle_holonomy_is_solid_angle() {
    let st = Spacetime::product_sphere(1.0);
    let verts = right_triangle(0.5);
    let omega =
        solid_angle(embed(verts[0].0, verts[0].1), embed(verts[1].0, verts[1].1), embed(verts[2].0, verts[2].1));
    assert!((omega - 0.5).abs() < 1e-12);
    let opts = ConnectOptions { output_step: 1e-3, ..Default::default() };
    let lp: Vec<Curve> = (0..3)
        .map(|i| {
            connect_geodesic(
                &st,
                &sphere_point(verts[i]),
                &sphere_point(verts[(i + 1) % 3]),
                ConnectKind::Spacelike,
                &opts,
            )
            .unwrap()
        })
        .collect();
    let base = sphere_point(verts[0]);
    let plane = tangent_plane(verts[0].0, base);
    let angle = loop_holonomy_angle(&st, &lp, &plane, &plane.first_vector()).unwrap();
    // counter-clockwise seen from outside: positive rotation
    assert!((angle - omega).abs() < 1e-5, "angle {angle} vs {omega}");
    // independent of the probe direction
    let other = loop_holonomy_angle(&st, &lp, &plane, &plane.direction(2.0)).unwrap();
    assert!((other - angle).abs() < 1e-7);
    // reversed loop gives the inverse rotation
    let rev: Vec<Curve> = lp.iter().rev().map(Curve::reversed).collect();
    let back = loop_holonomy_angle(&st, &rev, &plane, &plane.first_vector()).unwrap();
    assert!((back + angle).abs() < 1e-8);
}

#[test]
fn loop_splitting_is_additive() {
    // split the triangle along the chord from vertex 0 to the midpoint of the opposite side
    let st = Spacetime::product_sphere(1.0);
    let verts = right_triangle(0.4);
    let (b, c) = (embed(verts[1].0, verts[1].1), embed(verts[2].0, verts[2].1));
    let m = [b[0] + c[0], b[1] + c[1], b[2] + c[2]];
    let mn = dot3(&m, &m).sqrt();
    let mid = ((m[2] / mn).acos(), m[1].atan2(m[0]));
    let opts = ConnectOptions { output_step: 1e-3, ..Default::default() };
    let seg = |p: (f64, f64), q: (f64, f64)| {
        connect_geodesic(&st, &sphere_point(p), &sphere_point(q), ConnectKind::Spacelike, &opts).unwrap()
    };
    let base = sphere_point(verts[0]);
    let plane = tangent_plane(verts[0].0, base);
    let probe = plane.first_vector();
    let whole = loop_holonomy_angle(
        &st,
        &[seg(verts[0], verts[1]), seg(verts[1], verts[2]), seg(verts[2], verts[0])],
        &plane,
        &probe,
    )
    .unwrap();
    let first =
        loop_holonomy_angle(&st, &[seg(verts[0], verts[1]), seg(verts[1], mid), seg(mid, verts[0])], &plane, &probe)
            .unwrap();
    let second =
        loop_holonomy_angle(&st, &[seg(verts[0], mid), seg(mid, verts[2]), seg(verts[2], verts[0])], &plane, &probe)
            .unwrap();
    assert!((whole - first - second).abs() < 1e-6, "{whole} vs {first} + {second}");
}

#[test]
fn holonomy_converges_at_fourth_order() {
    let st = Spacetime::product_sphere(1.0);
    let verts = right_triangle(0.5);
    let base = sphere_point(verts[0]);
    let plane = tangent_plane(verts[0].0, base);
    let errors: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let lp = shot_triangle(&st, &verts, h);
            (loop_holonomy_angle(&st, &lp, &plane, &plane.first_vector()).unwrap() - 0.5).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "errors {errors:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_is_an_isometry(
        v in prop::array::uniform4(-1.0f64..1.0),
        w in prop::array::uniform4(-1.0f64..1.0),
        end in prop::array::uniform3(-0.5f64..0.5),
    ) {
        let st = weak_field();
        let to = [1.5, end[0], end[1], end[2]];
        let c = connect_geodesic(&st, &ORIGIN, &to, ConnectKind::Timelike, &ConnectOptions::default()).unwrap();
        let (tv, tw) = (TangentVector::new(ORIGIN, v), TangentVector::new(ORIGIN, w));
        let before = tv.dot(&st, &tw).unwrap();
        let (pv, pw) = (parallel_transport(&st, &tv, &c).unwrap(), parallel_transport(&st, &tw, &c).unwrap());
        let after = pv.dot(&st, &pw).unwrap();
        prop_assert!((before - after).abs() < 1e-8);
        // g(v, ẋ) is conserved as well
        let t0 = c.start_tangent();
        let t1 = c.end_tangent();
        prop_assert!((tv.dot(&st, &t0).unwrap() - pv.dot(&st, &t1).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn pi_is_reachable() {
    // sanity: the unit-speed equator covers π in length π
    let st = Spacetime::product_sphere(1.0);
    let c =
        shoot_geodesic(&st, &TangentVector::new([0.0, FRAC_PI_2, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]), PI, 1e-3).unwrap();
    assert!((c.end()[2] - PI).abs() < 1e-12);
}

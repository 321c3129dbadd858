//! Angle wrapping conventions: stored angles live in `[0, 2π)`, signed
//! differences in `(−π, π]`.

use std::f64::consts::{PI, TAU};

pub fn wrap_2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn wrap_pi(a: f64) -> f64 {
    let r = wrap_2pi(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Signed distance between two angles, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b)
}

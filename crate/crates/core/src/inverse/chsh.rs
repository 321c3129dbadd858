use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{InverseError, DEFAULT_INVERSE_BINS};
use crate::dynamics::{simp_probabilities, AngleDistribution};
use crate::rng::{batch_rng, uniform01};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshAngles {
    /// `{0, π/4, π/8, 3π/8}`.
    pub fn standard() -> Self {
        use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
        Self { a: 0.0, a_prime: FRAC_PI_4, b: FRAC_PI_8, b_prime: 3.0 * FRAC_PI_8 }
    }

    fn set(&mut self, i: usize, v: f64) {
        *[&mut self.a, &mut self.a_prime, &mut self.b, &mut self.b_prime][i] = v;
    }
}

/// Correlation `E(θ_ab)` of the simplified dynamics.
pub fn chsh_correlation(psi: &AngleDistribution, theta_ab: f64) -> f64 {
    simp_probabilities(psi, theta_ab).correlation()
}

/// `S = |E(a, b) − E(a, b′)| + |E(a′, b) + E(a′, b′)|`.
pub fn chsh_statistic(psi: &AngleDistribution, x: &ChshAngles) -> f64 {
    let e = |p: f64, q: f64| chsh_correlation(psi, p - q);
    (e(x.a, x.b) - e(x.a, x.b_prime)).abs() + (e(x.a_prime, x.b) + e(x.a_prime, x.b_prime)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshSearch {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_bins() -> usize {
    DEFAULT_INVERSE_BINS
}
fn default_restarts() -> usize {
    8
}
fn default_sweeps() -> usize {
    50
}

impl Default for ChshSearch {
    fn default() -> Self {
        Self { bins: default_bins(), restarts: default_restarts(), max_sweeps: default_sweeps(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshMaximum {
    pub s: f64,
    pub angles: ChshAngles,
    pub density: AngleDistribution,
    /// Largest `S` met at any point of the search.
    pub max_seen: f64,
    pub evaluations: usize,
}

struct Tracker {
    max_seen: f64,
    evaluations: usize,
}

impl Tracker {
    fn eval(&mut self, psi: &AngleDistribution, x: &ChshAngles) -> f64 {
        let s = chsh_statistic(psi, x);
        self.evaluations += 1;
        self.max_seen = self.max_seen.max(s);
        s
    }
}

/// Coordinate ascent on `S` from seeded random starts. Each sweep maximises
/// over every angle in turn (grid scan then golden section) and then over
/// the density; `S` is convex in the density, so the density block is
/// maximised at a single-bin density.
pub fn maximize_chsh(search: &ChshSearch) -> Result<ChshMaximum, InverseError> {
    let n = search.bins;
    let singles: Vec<AngleDistribution> =
        (0..n).map(|j| AngleDistribution::point_mass(n, TAU * j as f64 / n as f64)).collect::<Result<_, _>>()?;
    let mut tr = Tracker { max_seen: f64::NEG_INFINITY, evaluations: 0 };
    let mut best: Option<(f64, ChshAngles, AngleDistribution)> = None;
    for restart in 0..search.restarts.max(1) {
        let mut rng = batch_rng(search.seed, restart as u64);
        let weights: Vec<f64> = (0..n).map(|_| uniform01(&mut rng)).collect();
        let mut psi = AngleDistribution::from_weights(&weights)?;
        let mut x = ChshAngles { a: 0.0, a_prime: 0.0, b: 0.0, b_prime: 0.0 };
        for i in 0..4 {
            x.set(i, TAU * uniform01(&mut rng));
        }
        let mut s = tr.eval(&psi, &x);
        for _ in 0..search.max_sweeps {
            let start = s;
            for i in 0..4 {
                let (v, sv) = maximize_coordinate(&mut tr, &psi, &x, i);
                if sv > s {
                    x.set(i, v);
                    s = sv;
                }
            }
            for single in &singles {
                let sv = tr.eval(single, &x);
                if sv > s {
                    psi = single.clone();
                    s = sv;
                }
            }
            if s - start < 1e-13 {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| s > b.0) {
            best = Some((s, x, psi));
        }
    }
    let (s, angles, density) = best.expect("at least one restart");
    Ok(ChshMaximum { s, angles, density, max_seen: tr.max_seen, evaluations: tr.evaluations })
}

fn maximize_coordinate(tr: &mut Tracker, psi: &AngleDistribution, x: &ChshAngles, i: usize) -> (f64, f64) {
    const SCAN: usize = 720;
    let h = TAU / SCAN as f64;
    let mut y = *x;
    let mut f = |v: f64| {
        y.set(i, v);
        tr.eval(psi, &y)
    };
    let (mut k_best, mut f_best) = (0, f64::NEG_INFINITY);
    for k in 0..SCAN {
        let fk = f(k as f64 * h);
        if fk > f_best {
            (k_best, f_best) = (k, fk);
        }
    }
    let (mut lo, mut hi) = ((k_best as f64 - 1.0) * h, (k_best as f64 + 1.0) * h);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let v = 0.5 * (lo + hi);
    let fv = f(v);
    if fv >= f_best {
        (v, fv)
    } else {
        (k_best as f64 * h, f_best)
    }
}

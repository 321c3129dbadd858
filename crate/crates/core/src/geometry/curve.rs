use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::integrate::{rk4_step, to_divergence};
use super::vector::{point_distance, BASE_TOLERANCE};
use super::{contract, CausalCharacter, GeometryError, Point, Spacetime, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    TimelikeGeodesic,
    NullGeodesic,
    SpacelikeGeodesic,
    General,
}

impl CurveKind {
    pub fn geodesic(character: CausalCharacter) -> Self {
        match character {
            CausalCharacter::Timelike => CurveKind::TimelikeGeodesic,
            CausalCharacter::Null => CurveKind::NullGeodesic,
            CausalCharacter::Spacelike => CurveKind::SpacelikeGeodesic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub param: f64,
    pub point: Point,
    pub tangent: Vector4<f64>,
}

/// Sampled curve. When `piecewise_geodesic` is set, consecutive samples are
/// joined by geodesic steps and transport re-integrates each step from the
/// stored sample; otherwise the path between samples is a cubic Hermite
/// interpolant.
#[derive(Debug, Clone)]
pub struct Curve {
    kind: CurveKind,
    samples: Vec<CurveSample>,
    step: f64,
    piecewise_geodesic: bool,
}

impl Curve {
    /// A general curve from user-supplied samples, parameters strictly increasing.
    pub fn from_samples(samples: Vec<CurveSample>) -> Result<Self, GeometryError> {
        if samples.len() < 2 || samples.windows(2).any(|w| !(w[1].param > w[0].param)) {
            return Err(GeometryError::BadCurve("need ≥ 2 samples with increasing parameter".into()));
        }
        let step = samples[1].param - samples[0].param;
        Ok(Self { kind: CurveKind::General, samples, step, piecewise_geodesic: false })
    }

    pub(crate) fn geodesic(kind: CurveKind, samples: Vec<CurveSample>, step: f64) -> Self {
        Self { kind, samples, step, piecewise_geodesic: true }
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn start(&self) -> Point {
        self.samples[0].point
    }

    pub fn end(&self) -> Point {
        self.samples[self.samples.len() - 1].point
    }

    pub fn start_tangent(&self) -> TangentVector {
        TangentVector::from_vector(self.samples[0].point, self.samples[0].tangent)
    }

    pub fn end_tangent(&self) -> TangentVector {
        let s = &self.samples[self.samples.len() - 1];
        TangentVector::from_vector(s.point, s.tangent)
    }

    /// Parameter span of the curve.
    pub fn length(&self) -> f64 {
        self.samples[self.samples.len() - 1].param - self.samples[0].param
    }

    /// Same path traversed backwards, tangents negated.
    pub fn reversed(&self) -> Self {
        let last = self.samples[self.samples.len() - 1].param;
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| CurveSample { param: last - s.param, point: s.point, tangent: -s.tangent })
            .collect();
        Self { kind: self.kind, samples, step: self.step, piecewise_geodesic: self.piecewise_geodesic }
    }

    /// Head-to-tail concatenation. Both joint samples are kept (equal
    /// parameter) so each piece keeps its own tangent at the joint.
    pub fn concat(&self, next: &Curve) -> Result<Self, GeometryError> {
        if point_distance(&self.end(), &next.start()) > BASE_TOLERANCE {
            return Err(GeometryError::BaseMismatch { expected: self.end(), found: next.start() });
        }
        let offset = self.samples[self.samples.len() - 1].param - next.samples[0].param;
        let mut samples = self.samples.clone();
        samples.extend(next.samples.iter().map(|s| CurveSample { param: s.param + offset, ..*s }));
        // a concatenation of geodesics is in general not a geodesic
        Ok(Self {
            kind: CurveKind::General,
            samples,
            step: self.step,
            piecewise_geodesic: self.piecewise_geodesic && next.piecewise_geodesic,
        })
    }

    pub fn is_piecewise_geodesic(&self) -> bool {
        self.piecewise_geodesic
    }

    /// Index `i` of the interval `[param_i, param_{i+1}]` containing `param`.
    fn interval(&self, param: f64) -> usize {
        let i = self.samples.partition_point(|s| s.param <= param);
        i.clamp(1, self.samples.len() - 1) - 1
    }

    /// Position and tangent at an arbitrary parameter (cubic Hermite).
    pub fn evaluate(&self, param: f64) -> (Point, Vector4<f64>) {
        let i = self.interval(param);
        hermite(&self.samples[i], &self.samples[i + 1], param)
    }

    /// Max over interior samples of |ẍ + Γ(ẋ,ẋ)|, with ẍ from central differences.
    pub fn geodesic_residual(&self, st: &Spacetime) -> Result<f64, GeometryError> {
        let mut worst: f64 = 0.0;
        for w in self.samples.windows(3) {
            let dp = w[2].param - w[0].param;
            if w[1].param == w[0].param || w[2].param == w[1].param {
                continue;
            }
            let acc = (w[2].tangent - w[0].tangent) / dp;
            let gamma = st.christoffel(&w[1].point)?;
            let r = acc + contract(&gamma, &w[1].tangent, &w[1].tangent);
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }

    /// Max over samples of |g(ẋ,ẋ)|; zero for an exact null curve.
    pub fn max_abs_norm(&self, st: &Spacetime) -> Result<f64, GeometryError> {
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            worst = worst.max(st.inner(&s.point, &s.tangent, &s.tangent)?.abs());
        }
        Ok(worst)
    }

    /// Transports `N` vectors at the curve start to the curve end.
    pub(crate) fn transport_vectors<const N: usize>(
        &self,
        st: &Spacetime,
        mut ws: [Vector4<f64>; N],
    ) -> Result<[Vector4<f64>; N], GeometryError> {
        for pair in self.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let h = b.param - a.param;
            if h == 0.0 {
                continue;
            }
            ws = if self.piecewise_geodesic {
                rk4_step(st, a.point, a.tangent, ws, h).map_err(|e| to_divergence(e, a.param))?.2
            } else {
                interpolated_step(st, a, b, ws)?
            };
        }
        Ok(ws)
    }
}

fn hermite(a: &CurveSample, b: &CurveSample, param: f64) -> (Point, Vector4<f64>) {
    let h = b.param - a.param;
    let t = (param - a.param) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let d00 = (6.0 * t2 - 6.0 * t) / h;
    let d10 = 3.0 * t2 - 4.0 * t + 1.0;
    let d01 = (-6.0 * t2 + 6.0 * t) / h;
    let d11 = 3.0 * t2 - 2.0 * t;
    let mut x = [0.0; 4];
    let mut v = Vector4::zeros();
    for k in 0..4 {
        x[k] = h00 * a.point[k] + h10 * h * a.tangent[k] + h01 * b.point[k] + h11 * h * b.tangent[k];
        v[k] = d00 * a.point[k] + d10 * a.tangent[k] + d01 * b.point[k] + d11 * b.tangent[k];
    }
    (x, v)
}

fn interpolated_step<const N: usize>(
    st: &Spacetime,
    a: &CurveSample,
    b: &CurveSample,
    ws: [Vector4<f64>; N],
) -> Result<[Vector4<f64>; N], GeometryError> {
    let h = b.param - a.param;
    let deriv = |param: f64, ws: &[Vector4<f64>; N]| -> Result<[Vector4<f64>; N], GeometryError> {
        let (x, u) = hermite(a, b, param);
        let gamma = st.christoffel(&x)?;
        Ok(std::array::from_fn(|k| -contract(&gamma, &u, &ws[k])))
    };
    let k1 = deriv(a.param, &ws)?;
    let s2: [Vector4<f64>; N] = std::array::from_fn(|k| ws[k] + k1[k] * (0.5 * h));
    let k2 = deriv(a.param + 0.5 * h, &s2)?;
    let s3: [Vector4<f64>; N] = std::array::from_fn(|k| ws[k] + k2[k] * (0.5 * h));
    let k3 = deriv(a.param + 0.5 * h, &s3)?;
    let s4: [Vector4<f64>; N] = std::array::from_fn(|k| ws[k] + k3[k] * h);
    let k4 = deriv(b.param, &s4)?;
    Ok(std::array::from_fn(|k| ws[k] + (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (h / 6.0)))
}

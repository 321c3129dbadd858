use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, Spacetime};

/// Tolerance used when classifying a vector as null.
pub const CAUSAL_TOLERANCE: f64 = 1e-9;

/// Tolerance on shared base points.
pub const BASE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
}

/// Contravariant vector attached to a coordinate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Vector4<f64>,
}

impl TangentVector {
    pub fn new(base: Point, components: [f64; 4]) -> Self {
        Self { base, components: Vector4::from(components) }
    }

    pub fn from_vector(base: Point, components: Vector4<f64>) -> Self {
        Self { base, components }
    }

    pub fn norm_squared(&self, st: &Spacetime) -> Result<f64, GeometryError> {
        st.inner(&self.base, &self.components, &self.components)
    }

    pub fn dot(&self, st: &Spacetime, other: &TangentVector) -> Result<f64, GeometryError> {
        check_same_base(&self.base, &other.base)?;
        st.inner(&self.base, &self.components, &other.components)
    }

    /// Classification relative to the Euclidean size of the components, so
    /// that the verdict does not depend on the overall scale.
    pub fn character(&self, st: &Spacetime) -> Result<CausalCharacter, GeometryError> {
        let n = self.norm_squared(st)?;
        let scale = self.components.norm_squared().max(f64::MIN_POSITIVE);
        Ok(if n.abs() <= CAUSAL_TOLERANCE * scale {
            CausalCharacter::Null
        } else if n < 0.0 {
            CausalCharacter::Timelike
        } else {
            CausalCharacter::Spacelike
        })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { base: self.base, components: self.components * k }
    }

    pub fn rebased(&self, base: Point) -> Self {
        Self { base, components: self.components }
    }
}

pub(crate) fn check_same_base(a: &Point, b: &Point) -> Result<(), GeometryError> {
    if point_distance(a, b) > BASE_TOLERANCE {
        return Err(GeometryError::BaseMismatch { expected: *a, found: *b });
    }
    Ok(())
}

pub fn point_distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Orthonormal frame `e_0..e_3` with `e_0` timelike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub base: Point,
    pub e: [Vector4<f64>; 4],
}

impl Frame {
    /// Gram–Schmidt on the coordinate basis, `∂_t` first.
    pub fn coordinate_aligned(st: &Spacetime, base: Point) -> Result<Self, GeometryError> {
        let g = st.metric(&base)?;
        let ip = |u: &Vector4<f64>, v: &Vector4<f64>| u.dot(&(g * v));
        let mut e: [Vector4<f64>; 4] = [Vector4::zeros(); 4];
        let signs = [-1.0, 1.0, 1.0, 1.0];
        for k in 0..4 {
            let mut v = Vector4::zeros();
            v[k] = 1.0;
            for j in 0..k {
                let c = ip(&v, &e[j]) * signs[j];
                v -= e[j] * c;
            }
            let n = ip(&v, &v);
            if n * signs[k] <= 0.0 {
                return Err(GeometryError::BadSignature { point: base });
            }
            e[k] = v / n.abs().sqrt();
        }
        Ok(Self { base, e })
    }

    /// Rotates `e_1, e_2` by `angle` about `e_3`.
    pub fn rotated_about_e3(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut e = self.e;
        e[1] = self.e[1] * c + self.e[2] * s;
        e[2] = -self.e[1] * s + self.e[2] * c;
        Self { base: self.base, e }
    }

    /// Re-orients the spatial triad so that `e_3` points along the spatial
    /// direction with frame components `dir`, keeping `e_0`.
    pub fn aligned_to(&self, dir: [f64; 3]) -> Result<Self, GeometryError> {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if !(n > 1e-12) {
            return Err(GeometryError::BadDirection);
        }
        let d = [dir[0] / n, dir[1] / n, dir[2] / n];
        // pick the frame axis least aligned with d as the seed for e_1
        let seed = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let dot = seed[0] * d[0] + seed[1] * d[1] + seed[2] * d[2];
        let mut a = [seed[0] - dot * d[0], seed[1] - dot * d[1], seed[2] - dot * d[2]];
        let an = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        a.iter_mut().for_each(|x| *x /= an);
        let b = [d[1] * a[2] - d[2] * a[1], d[2] * a[0] - d[0] * a[2], d[0] * a[1] - d[1] * a[0]];
        let combine = |c: [f64; 3]| self.e[1] * c[0] + self.e[2] * c[1] + self.e[3] * c[2];
        Ok(Self { base: self.base, e: [self.e[0], combine(a), combine(b), combine(d)] })
    }

    pub fn vector(&self, k: usize) -> TangentVector {
        TangentVector::from_vector(self.base, self.e[k])
    }

    /// Largest |g(e_α, e_β) − η_αβ| over the frame.
    pub fn orthonormality_defect(&self, st: &Spacetime) -> Result<f64, GeometryError> {
        let g = st.metric(&self.base)?;
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let eta = match (a == b, a) {
                    (true, 0) => -1.0,
                    (true, _) => 1.0,
                    _ => 0.0,
                };
                worst = worst.max((self.e[a].dot(&(g * self.e[b])) - eta).abs());
            }
        }
        Ok(worst)
    }
}

/// Spacelike 2-plane given by an ordered orthonormal basis; the order fixes
/// the orientation of measured angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub base: Point,
    pub first: Vector4<f64>,
    pub second: Vector4<f64>,
}

impl Plane {
    pub fn new(first: TangentVector, second: TangentVector) -> Result<Self, GeometryError> {
        check_same_base(&first.base, &second.base)?;
        Ok(Self { base: first.base, first: first.components, second: second.components })
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Self { base: frame.base, first: frame.e[1], second: frame.e[2] }
    }

    /// Unit vector at `angle` from the first basis vector.
    pub fn direction(&self, angle: f64) -> TangentVector {
        let (s, c) = angle.sin_cos();
        TangentVector::from_vector(self.base, self.first * c + self.second * s)
    }

    pub fn first_vector(&self) -> TangentVector {
        TangentVector::from_vector(self.base, self.first)
    }

    pub fn second_vector(&self) -> TangentVector {
        TangentVector::from_vector(self.base, self.second)
    }
}

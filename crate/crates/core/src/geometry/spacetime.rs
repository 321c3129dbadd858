use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::grid::GridMetric;
use super::{GeometryError, Point};

/// Christoffel symbols indexed `[mu][alpha][beta]` for Γ^μ_{αβ}.
pub type Christoffel = [[[f64; 4]; 4]; 4];

/// Smallest |det g| accepted before a point is treated as degenerate.
pub const DET_TOLERANCE: f64 = 1e-10;

/// Symmetry tolerance on metric components.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Static weak-field metric `-(1+2Φ)dt² + (1-2Φ)|dx|²` with a softened point
/// potential `Φ = -M / sqrt(|x - c|² + s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakField {
    pub mass: f64,
    /// Plummer softening length; keeps the potential finite at the centre.
    pub softening: f64,
    pub center: [f64; 3],
}

impl WeakField {
    fn potential_and_gradient(&self, x: &Point) -> (f64, [f64; 3]) {
        let d = [x[1] - self.center[0], x[2] - self.center[1], x[3] - self.center[2]];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + self.softening * self.softening;
        let r = r2.sqrt();
        let phi = -self.mass / r;
        let k = self.mass / (r2 * r);
        (phi, [k * d[0], k * d[1], k * d[2]])
    }
}

#[derive(Debug, Clone)]
pub enum MetricModel {
    Minkowski,
    WeakField(WeakField),
    /// Flat time × 2-sphere of radius `radius` × line, in coordinates (t, θ, φ, z).
    ProductSphere {
        radius: f64,
    },
    /// Tabulated metric on a regular grid, multilinear in between.
    Grid(GridMetric),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ChristoffelMode {
    ClosedForm,
    CentralDifference { h: f64 },
}

#[derive(Debug, Clone)]
pub struct Spacetime {
    model: MetricModel,
    mode: ChristoffelMode,
    chart_bound: f64,
}

pub const DEFAULT_CHART_BOUND: f64 = 1e3;
const SPHERE_POLE_MARGIN: f64 = 1e-6;

impl Spacetime {
    pub fn minkowski() -> Self {
        Self::new(MetricModel::Minkowski, ChristoffelMode::ClosedForm)
    }

    pub fn weak_field(field: WeakField) -> Self {
        Self::new(MetricModel::WeakField(field), ChristoffelMode::ClosedForm)
    }

    pub fn product_sphere(radius: f64) -> Self {
        Self::new(MetricModel::ProductSphere { radius }, ChristoffelMode::ClosedForm)
    }

    pub fn from_grid(grid: GridMetric, h: f64) -> Self {
        Self::new(MetricModel::Grid(grid), ChristoffelMode::CentralDifference { h })
    }

    /// Tabulated metrics have no analytic derivatives, so closed-form mode
    /// silently falls back to central differences with `h = 1e-6`.
    pub fn new(model: MetricModel, mode: ChristoffelMode) -> Self {
        let mode = match (&model, mode) {
            (MetricModel::Grid(_), ChristoffelMode::ClosedForm) => ChristoffelMode::CentralDifference { h: 1e-6 },
            (_, m) => m,
        };
        Self { model, mode, chart_bound: DEFAULT_CHART_BOUND }
    }

    pub fn with_chart_bound(mut self, bound: f64) -> Self {
        self.chart_bound = bound;
        self
    }

    pub fn with_mode(mut self, mode: ChristoffelMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn model(&self) -> &MetricModel {
        &self.model
    }

    pub fn mode(&self) -> ChristoffelMode {
        self.mode
    }

    pub fn chart_bound(&self) -> f64 {
        self.chart_bound
    }

    pub fn is_flat(&self) -> bool {
        match &self.model {
            MetricModel::Minkowski => true,
            MetricModel::WeakField(w) => w.mass == 0.0,
            _ => false,
        }
    }

    pub fn in_chart(&self, x: &Point) -> bool {
        if x.iter().any(|c| !c.is_finite() || c.abs() > self.chart_bound) {
            return false;
        }
        match &self.model {
            MetricModel::ProductSphere { .. } => {
                x[1] > SPHERE_POLE_MARGIN && x[1] < std::f64::consts::PI - SPHERE_POLE_MARGIN
            }
            MetricModel::Grid(grid) => grid.contains(x),
            _ => true,
        }
    }

    fn check_chart(&self, x: &Point) -> Result<(), GeometryError> {
        if self.in_chart(x) {
            Ok(())
        } else {
            Err(GeometryError::ChartEscape { point: *x })
        }
    }

    /// Metric components at `x`, without the non-degeneracy check.
    pub fn metric(&self, x: &Point) -> Result<Matrix4<f64>, GeometryError> {
        self.check_chart(x)?;
        Ok(self.metric_in_chart(x))
    }

    fn metric_in_chart(&self, x: &Point) -> Matrix4<f64> {
        match &self.model {
            MetricModel::Minkowski => Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0)),
            MetricModel::WeakField(w) => {
                let (phi, _) = w.potential_and_gradient(x);
                Matrix4::from_diagonal(&Vector4::new(
                    -(1.0 + 2.0 * phi),
                    1.0 - 2.0 * phi,
                    1.0 - 2.0 * phi,
                    1.0 - 2.0 * phi,
                ))
            }
            MetricModel::ProductSphere { radius } => {
                let r2 = radius * radius;
                let s = x[1].sin();
                Matrix4::from_diagonal(&Vector4::new(-1.0, r2, r2 * s * s, 1.0))
            }
            MetricModel::Grid(grid) => grid.interpolate(x),
        }
    }

    /// Partial derivatives `∂_k g` for the builtins with analytic metrics.
    fn analytic_derivatives(&self, x: &Point) -> Option<[Matrix4<f64>; 4]> {
        let mut d = [Matrix4::zeros(); 4];
        match &self.model {
            MetricModel::Minkowski => Some(d),
            MetricModel::WeakField(w) => {
                let (_, grad) = w.potential_and_gradient(x);
                for (k, g) in grad.iter().enumerate() {
                    let dk = &mut d[k + 1];
                    dk[(0, 0)] = -2.0 * g;
                    for i in 1..4 {
                        dk[(i, i)] = -2.0 * g;
                    }
                }
                Some(d)
            }
            MetricModel::ProductSphere { radius } => {
                let (s, c) = x[1].sin_cos();
                d[1][(2, 2)] = 2.0 * radius * radius * s * c;
                Some(d)
            }
            MetricModel::Grid(_) => None,
        }
    }

    fn difference_derivatives(&self, x: &Point, h: f64) -> Result<[Matrix4<f64>; 4], GeometryError> {
        let mut d = [Matrix4::zeros(); 4];
        for (k, dk) in d.iter_mut().enumerate() {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let gp = self.metric(&xp)?;
            let gm = self.metric(&xm)?;
            *dk = (gp - gm) / (2.0 * h);
        }
        Ok(d)
    }

    /// Metric and its inverse after the symmetry and non-degeneracy checks.
    pub fn metric_and_inverse(&self, x: &Point) -> Result<(Matrix4<f64>, Matrix4<f64>), GeometryError> {
        let g = self.metric(x)?;
        let asym = (g - g.transpose()).abs().max();
        if asym > SYMMETRY_TOLERANCE {
            return Err(GeometryError::AsymmetricMetric { point: *x, defect: asym });
        }
        let det = g.determinant();
        if !(det.abs() > DET_TOLERANCE) {
            return Err(GeometryError::DegenerateMetric { point: *x, det });
        }
        let inv = g.try_inverse().ok_or(GeometryError::DegenerateMetric { point: *x, det })?;
        Ok((g, inv))
    }

    /// Levi-Civita connection coefficients at `x`.
    pub fn christoffel(&self, x: &Point) -> Result<Christoffel, GeometryError> {
        let (_, inv) = self.metric_and_inverse(x)?;
        let dg = match self.mode {
            ChristoffelMode::ClosedForm => match self.analytic_derivatives(x) {
                Some(d) => d,
                None => self.difference_derivatives(x, 1e-6)?,
            },
            ChristoffelMode::CentralDifference { h } => self.difference_derivatives(x, h)?,
        };
        // lowered[nu][alpha][beta] = ½(∂_α g_{νβ} + ∂_β g_{να} − ∂_ν g_{αβ})
        let mut lowered = [[[0.0; 4]; 4]; 4];
        for (nu, l_nu) in lowered.iter_mut().enumerate() {
            for alpha in 0..4 {
                for beta in alpha..4 {
                    let v = 0.5 * (dg[alpha][(nu, beta)] + dg[beta][(nu, alpha)] - dg[nu][(alpha, beta)]);
                    l_nu[alpha][beta] = v;
                    l_nu[beta][alpha] = v;
                }
            }
        }
        let mut gamma = [[[0.0; 4]; 4]; 4];
        for (mu, g_mu) in gamma.iter_mut().enumerate() {
            for alpha in 0..4 {
                for beta in alpha..4 {
                    let mut acc = 0.0;
                    for (nu, l_nu) in lowered.iter().enumerate() {
                        acc += inv[(mu, nu)] * l_nu[alpha][beta];
                    }
                    g_mu[alpha][beta] = acc;
                    g_mu[beta][alpha] = acc;
                }
            }
        }
        Ok(gamma)
    }

    pub fn inner(&self, x: &Point, u: &Vector4<f64>, v: &Vector4<f64>) -> Result<f64, GeometryError> {
        let g = self.metric(x)?;
        Ok(u.dot(&(g * v)))
    }
}

/// Contracts Γ^μ_{αβ} u^α v^β.
pub fn contract(gamma: &Christoffel, u: &Vector4<f64>, v: &Vector4<f64>) -> Vector4<f64> {
    let mut out = Vector4::zeros();
    for mu in 0..4 {
        let mut acc = 0.0;
        for a in 0..4 {
            let ua = u[a];
            if ua == 0.0 {
                continue;
            }
            for b in 0..4 {
                acc += gamma[mu][a][b] * ua * v[b];
            }
        }
        out[mu] = acc;
    }
    out
}

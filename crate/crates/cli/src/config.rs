use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use curved_chsh::dynamics::{AngleDistribution, DEFAULT_QUADRATURE_NODES, MIN_MC_SAMPLES, MIN_QUADRATURE_NODES};
use curved_chsh::geometry::{GridMetric, Spacetime, WeakField};
use curved_chsh::inverse::{InverseProblem, TargetSet, DEFAULT_INVERSE_BINS};
use curved_chsh::scan::{SweepSpec, ThetaVSpec};
use curved_chsh::scenario::ExperimentConfig;
use curved_chsh::worldviews::{DEFAULT_SIEVE_CAP, DEFAULT_STATE_CAP};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spacetime: Option<SpacetimeConfig>,
    #[serde(default)]
    pub scenario: Option<ExperimentConfig>,
    #[serde(default)]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default)]
    pub inverse: Option<InverseConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub worldviews: Option<WorldviewsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpacetimeConfig {
    Minkowski,
    WeakField {
        mass: f64,
        softening: f64,
        center: [f64; 3],
    },
    ProductSphere {
        radius: f64,
    },
    /// Tabulated metric; `path` is relative to the config file.
    Grid {
        path: PathBuf,
        #[serde(default = "default_fd_step")]
        h: f64,
    },
}

fn default_fd_step() -> f64 {
    1e-4
}

impl SpacetimeConfig {
    pub fn build(&self, base: &Path) -> Result<Spacetime, CliError> {
        Ok(match self {
            SpacetimeConfig::Minkowski => Spacetime::minkowski(),
            SpacetimeConfig::WeakField { mass, softening, center } => {
                Spacetime::weak_field(WeakField { mass: *mass, softening: *softening, center: *center })
            }
            SpacetimeConfig::ProductSphere { radius } => Spacetime::product_sphere(*radius),
            SpacetimeConfig::Grid { path, h } => {
                let grid = GridMetric::from_path(base.join(path))
                    .map_err(|e| CliError::schema("spacetime.path", e.to_string()))?;
                Spacetime::from_grid(grid, *h)
            }
        })
    }
}

/// Source of the holonomy difference `ψ₋` for `run probabilities`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `ψ₋ = θ_A1 − θ_B1` of the configured geometry.
    #[default]
    Geometry,
    PointMass {
        angle: f64,
    },
    Uniform {
        bins: usize,
    },
    Weights {
        weights: Vec<f64>,
    },
}

fn default_theta_ab() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect()
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "default_theta_ab")]
    pub theta_ab: Vec<f64>,
    #[serde(default)]
    pub psi: PsiSpec,
    #[serde(default)]
    pub theta_v: ThetaVSpec,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// 0 disables the Monte Carlo column.
    #[serde(default)]
    pub mc_samples: u64,
}

fn default_inverse_bins() -> usize {
    DEFAULT_INVERSE_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub targets: TargetSet,
    #[serde(default = "default_inverse_bins")]
    pub bins: usize,
    #[serde(default)]
    pub regularization: f64,
}

impl InverseConfig {
    pub fn problem(&self) -> InverseProblem {
        InverseProblem { targets: self.targets.angles(), bins: self.bins, regularization: self.regularization }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    #[default]
    UniformProduct,
    /// Random per-slot distributions drawn from the top-level seed.
    RandomProduct,
}

fn default_support() -> usize {
    1
}

fn default_state_cap() -> u64 {
    DEFAULT_STATE_CAP
}

fn default_sieve_cap() -> usize {
    DEFAULT_SIEVE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldviewsConfig {
    /// Inline edge-list text.
    #[serde(default)]
    pub dag: Option<String>,
    /// Edge-list file relative to the config file.
    #[serde(default)]
    pub dag_file: Option<PathBuf>,
    /// True configuration as `[field][point]`; all zeros when absent.
    #[serde(default)]
    pub truth: Option<Vec<Vec<u32>>>,
    /// Observer chain by point name; a greedy maximal chain when absent.
    #[serde(default)]
    pub chain: Option<Vec<String>>,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default = "default_support")]
    pub max_support: usize,
    #[serde(default = "default_state_cap")]
    pub state_cap: u64,
    #[serde(default = "default_sieve_cap")]
    pub sieve_cap: usize,
    /// Also run the built-in two-observer measurement instance.
    #[serde(default)]
    pub measurement: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), formats: default_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Parses JSON, reporting the path of the offending field.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
    })
}

fn check(ok: bool, path: &str, message: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::schema(path, message))
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

impl Config {
    /// Range and consistency checks beyond the JSON shape.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(st) = &self.spacetime {
            match st {
                SpacetimeConfig::Minkowski => {}
                SpacetimeConfig::WeakField { mass, softening, center } => {
                    check(finite(*mass), "spacetime.mass", "must be finite")?;
                    check(*softening > 0.0 && finite(*softening), "spacetime.softening", "must be positive")?;
                    check(center.iter().all(|c| finite(*c)), "spacetime.center", "must be finite")?;
                }
                SpacetimeConfig::ProductSphere { radius } => {
                    check(*radius > 0.0 && finite(*radius), "spacetime.radius", "must be positive")?;
                }
                SpacetimeConfig::Grid { h, .. } => check(*h > 0.0 && finite(*h), "spacetime.h", "must be positive")?,
            }
        }
        if let Some(s) = &self.scenario {
            check(s.tau_e > 0.0 && finite(s.tau_e), "scenario.tau_e", "must be positive and finite")?;
            check(s.observer_speed > 0.0 && s.observer_speed < 1.0, "scenario.observer_speed", "must lie in (0, 1)")?;
            check(!s.dirs_a.is_empty(), "scenario.dirs_a", "must be non-empty")?;
            check(!s.dirs_b.is_empty(), "scenario.dirs_b", "must be non-empty")?;
            check(s.step > 0.0 && finite(s.step), "scenario.step", "must be positive")?;
            s.validate().map_err(|e| CliError::schema("scenario", e.to_string()))?;
        }
        if let Some(d) = &self.dynamics {
            check(!d.theta_ab.is_empty(), "dynamics.theta_ab", "must be non-empty")?;
            check(d.theta_ab.iter().all(|t| finite(*t)), "dynamics.theta_ab", "must be finite")?;
            check(
                d.nodes >= MIN_QUADRATURE_NODES,
                "dynamics.nodes",
                &format!("must be at least {MIN_QUADRATURE_NODES}"),
            )?;
            if d.mc_samples > 0 {
                check(
                    d.mc_samples >= MIN_MC_SAMPLES,
                    "dynamics.mc_samples",
                    &format!("must be 0 or at least {MIN_MC_SAMPLES}"),
                )?;
                check(self.seed.is_some(), "seed", "required when dynamics.mc_samples > 0")?;
            }
            d.theta_v.distribution().map_err(|e| CliError::schema("dynamics.theta_v", e.to_string()))?;
            match &d.psi {
                PsiSpec::Geometry => {
                    check(self.spacetime.is_some(), "spacetime", "required by dynamics.psi = geometry")?;
                    check(self.scenario.is_some(), "scenario", "required by dynamics.psi = geometry")?;
                }
                PsiSpec::PointMass { angle } => check(finite(*angle), "dynamics.psi.angle", "must be finite")?,
                PsiSpec::Uniform { bins } => {
                    AngleDistribution::uniform(*bins)
                        .map_err(|e| CliError::schema("dynamics.psi.bins", e.to_string()))?;
                }
                PsiSpec::Weights { weights } => {
                    AngleDistribution::from_weights(weights)
                        .map_err(|e| CliError::schema("dynamics.psi.weights", e.to_string()))?;
                }
            }
        }
        if let Some(i) = &self.inverse {
            i.problem().validate().map_err(|e| CliError::schema("inverse", e.to_string()))?;
        }
        if let Some(s) = &self.sweep {
            s.validate().map_err(|e| match CliError::from(e) {
                CliError::Schema { path, message } => CliError::Schema { path, message },
                other => CliError::schema("sweep", other.to_string()),
            })?;
        }
        if let Some(w) = &self.worldviews {
            check(w.dag.is_some() != w.dag_file.is_some(), "worldviews.dag", "give exactly one of dag, dag_file")?;
            check(w.max_support >= 1, "worldviews.max_support", "must be at least 1")?;
            if w.measure == MeasureConfig::RandomProduct {
                check(self.seed.is_some(), "seed", "required by worldviews.measure = random-product")?;
            }
        }
        check(!self.output.formats.is_empty(), "output.formats", "must be non-empty")?;
        Ok(())
    }

    /// Applies command-line overrides; the sweep inherits the top-level seed.
    pub fn apply_overrides(&mut self, seed: Option<u64>, nodes: Option<usize>, out: Option<PathBuf>) {
        if seed.is_some() {
            self.seed = seed;
        }
        if let Some(n) = nodes {
            if let Some(d) = &mut self.dynamics {
                d.nodes = n;
            }
            if let Some(s) = &mut self.sweep {
                s.nodes = n;
            }
        }
        if let Some(dir) = out {
            self.output.dir = dir;
        }
        if let Some(s) = &mut self.sweep {
            if seed.is_some() || s.seed.is_none() {
                s.seed = self.seed.or(s.seed);
            }
        }
    }
}

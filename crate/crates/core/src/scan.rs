//! Parameter sweeps: geometry across a family of spacetimes, the measured
//! angles at every gridpoint, outcome probabilities by closed form,
//! quadrature and Monte Carlo, CHSH statistics, and the empirical
//! holonomy-difference distribution of a randomly perturbed ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::angles::wrap_pi;
use crate::dynamics::{
    iv_closed_form, iv_quadrature, mc_probability, quantum_target, AngleDistribution, DynamicsError, HolonomySampler,
    McConfig, McEstimate, Outcome, OutcomeProbabilities, ResponseFunction, DEFAULT_QUADRATURE_NODES, MIN_MC_SAMPLES,
    MIN_QUADRATURE_NODES,
};
use crate::geometry::{Spacetime, WeakField};
use crate::inverse::{solve_nnls, ChshAngles, InverseError, InverseProblem, InverseReport};
use crate::rng::{batch_rng, derive_seed, uniform01};
use crate::scenario::{
    build_geometry, decompose_holonomy, extract_angles, AngleSet, ExperimentConfig, HolonomyDecomposition,
    ScenarioError,
};
use crate::CODE_VERSION;

pub const MIN_PSI_DRAWS: usize = 100;
/// Largest fraction of failed geometry builds tolerated by
/// [`empirical_psi_distribution`].
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// A Monte Carlo cell agrees with quadrature when within this many
/// standard errors.
pub const MC_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScanError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("Monte Carlo requested without a seed")]
    SeedRequired,
    #[error("{n} draws requested, at least {min} required")]
    TooFewDraws { n: usize, min: usize },
    #[error("{failed} of {total} perturbed geometries failed to build")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
}

/// One-parameter family of spacetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpacetimeFamily {
    /// The parameter is ignored.
    Minkowski,
    /// The parameter is the mass of the softened point potential.
    WeakField { softening: f64, center: [f64; 3] },
}

impl SpacetimeFamily {
    pub fn spacetime(&self, parameter: f64) -> Spacetime {
        match *self {
            SpacetimeFamily::Minkowski => Spacetime::minkowski(),
            SpacetimeFamily::WeakField { softening, center } => {
                Spacetime::weak_field(WeakField { mass: parameter, softening, center })
            }
        }
    }

    fn validate(&self) -> Result<(), ScanError> {
        if let SpacetimeFamily::WeakField { softening, center } = self {
            if !(*softening > 0.0 && softening.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                return Err(ScanError::InvalidSpec("weak-field softening must be positive, centre finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThetaVSpec {
    Uniform {
        bins: usize,
    },
    /// Relative bin weights.
    Weights {
        weights: Vec<f64>,
    },
}

impl Default for ThetaVSpec {
    fn default() -> Self {
        ThetaVSpec::Uniform { bins: 64 }
    }
}

impl ThetaVSpec {
    pub fn distribution(&self) -> Result<AngleDistribution, DynamicsError> {
        match self {
            ThetaVSpec::Uniform { bins } => AngleDistribution::uniform(*bins),
            ThetaVSpec::Weights { weights } => AngleDistribution::from_weights(weights),
        }
    }
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: SpacetimeFamily,
    /// Family parameter at each gridpoint.
    pub grid: Vec<f64>,
    /// Measurement directions are replaced by the CHSH quadruple.
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default = "ChshAngles::standard")]
    pub chsh: ChshAngles,
    #[serde(default)]
    pub theta_v: ThetaVSpec,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Monte Carlo samples per setting; 0 disables Monte Carlo.
    #[serde(default)]
    pub mc_samples: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Also solve the inverse problem for the quadruple's relative angles.
    #[serde(default = "default_true")]
    pub inverse: bool,
}

impl SweepSpec {
    pub fn new(family: SpacetimeFamily, grid: Vec<f64>) -> Self {
        Self {
            family,
            grid,
            experiment: ExperimentConfig::default(),
            chsh: ChshAngles::standard(),
            theta_v: ThetaVSpec::default(),
            nodes: DEFAULT_QUADRATURE_NODES,
            mc_samples: 0,
            seed: None,
            inverse: true,
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if self.grid.is_empty() || self.grid.iter().any(|g| !g.is_finite()) {
            return Err(ScanError::InvalidSpec("grid must be non-empty and finite".into()));
        }
        self.family.validate()?;
        self.experiment().validate()?;
        self.theta_v.distribution()?;
        if self.nodes < MIN_QUADRATURE_NODES {
            return Err(DynamicsError::ResolutionTooLow { nodes: self.nodes, min: MIN_QUADRATURE_NODES }.into());
        }
        if self.mc_samples > 0 {
            if self.seed.is_none() {
                return Err(ScanError::SeedRequired);
            }
            if self.mc_samples < MIN_MC_SAMPLES {
                return Err(DynamicsError::TooFewSamples { n: self.mc_samples, min: MIN_MC_SAMPLES }.into());
            }
        }
        Ok(())
    }

    /// Experiment with directions `[a, a′]` and `[b, b′]`.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            dirs_a: vec![self.chsh.a, self.chsh.a_prime],
            dirs_b: vec![self.chsh.b, self.chsh.b_prime],
            ..self.experiment.clone()
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingRecord {
    /// Indices into `[a, a′]` and `[b, b′]`.
    pub choice: [usize; 2],
    pub theta_ab: f64,
    /// Angles with the reference polarisation `θ_v = 0`.
    pub angles: AngleSet,
    /// Only for uniform `θ_v`.
    pub closed: Option<OutcomeProbabilities>,
    pub quad: OutcomeProbabilities,
    pub mc: Option<McEstimate>,
    /// `E` from the quadrature probabilities.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridpointRecord {
    pub index: usize,
    pub parameter: f64,
    pub holonomy: Option<HolonomyDecomposition>,
    pub psi_minus: Option<f64>,
    pub settings: Vec<SettingRecord>,
    pub chsh: Option<f64>,
    /// RMS difference between the quadrature and quantum probabilities
    /// over all settings and outcome pairs.
    pub quantum_residual: Option<f64>,
    /// Monte Carlo cells within [`MC_SIGMA`] standard errors of quadrature.
    pub mc_cells_passing: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub code_version: String,
    pub perturbation_scheme: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub spec: SweepSpec,
    pub gridpoints: Vec<GridpointRecord>,
    pub failures: usize,
    pub inverse: Option<InverseReport>,
}

impl SweepReport {
    /// Fraction of Monte Carlo cells that agree with quadrature.
    pub fn mc_pass_fraction(&self) -> Option<f64> {
        let (pass, total) = self.gridpoints.iter().fold((0, 0), |(p, t), g| match g.mc_cells_passing {
            Some(k) => (p + k, t + 4 * g.settings.len()),
            None => (p, t),
        });
        (total > 0).then(|| pass as f64 / total as f64)
    }
}

pub const PERTURBATION_SCHEME: &str =
    "weak-field bump: mass uniform on [0, max_mass], centre shifted uniformly within \
     ±spread per axis; draw i uses ChaCha8 stream (seed, i)";

/// Runs `f` on a pool of `threads` workers, or on the current pool.
fn install<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (ss, n) = values.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (ss / n.max(1) as f64).sqrt()
}

fn cells(p: &OutcomeProbabilities) -> [f64; 4] {
    [p.pp, p.pm, p.mp, p.mm]
}

fn run_gridpoint(
    spec: &SweepSpec,
    theta_v: &AngleDistribution,
    index: usize,
    parameter: f64,
) -> Result<GridpointRecord, ScanError> {
    let st = spec.family.spacetime(parameter);
    let cfg = spec.experiment();
    let geom = build_geometry(&st, &cfg)?;
    let hol = decompose_holonomy(&st, &geom)?;
    let response = ResponseFunction::MalusClassical;
    let (h_a, h_b) = (hol.theta_a1 + hol.theta_a2, hol.theta_b1 + hol.theta_b2);
    let mut settings = Vec::with_capacity(4);
    let mut passing = 0;
    for (k, (i, j)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let angles = extract_angles(&st, &geom, i, j, 0.0)?;
        // Directions relative to the reference polarisation; B reads −v.
        let theta_a = angles.theta_av;
        let theta_b = angles.theta_bv + std::f64::consts::PI;
        let quad = OutcomeProbabilities::from_fn(|a, b| {
            iv_quadrature(&response, theta_v, a, b, theta_a, theta_b, h_a, h_b, spec.nodes).unwrap_or(f64::NAN)
        });
        let theta_minus = theta_a - theta_b + h_a - h_b + std::f64::consts::PI;
        let closed =
            theta_v.is_uniform().then(|| OutcomeProbabilities::from_fn(|a, b| iv_closed_form(a, b, theta_minus)));
        let mc = match spec.seed.filter(|_| spec.mc_samples > 0) {
            Some(seed) => {
                let mc_cfg = McConfig::seeded(derive_seed(seed, (index * 4 + k) as u64), spec.mc_samples);
                let holonomy = HolonomySampler::Fixed { theta_a1: h_a, theta_b1: h_b };
                let est = mc_probability(&mc_cfg, theta_v, &holonomy, &response, theta_a, theta_b)?;
                let floor = 1.0 / spec.mc_samples as f64;
                passing += cells(&est.probabilities)
                    .iter()
                    .zip(cells(&est.stderr))
                    .zip(cells(&quad))
                    .filter(|((m, se), q)| (*m - *q).abs() <= MC_SIGMA * se.max(floor))
                    .count();
                Some(est)
            }
            None => None,
        };
        settings.push(SettingRecord {
            choice: [i, j],
            theta_ab: [spec.chsh.a, spec.chsh.a_prime][i] - [spec.chsh.b, spec.chsh.b_prime][j],
            angles,
            closed,
            quad,
            mc,
            correlation: quad.correlation(),
        });
    }
    let e: Vec<f64> = settings.iter().map(|s| s.correlation).collect();
    let chsh = (e[0] - e[1]).abs() + (e[2] + e[3]).abs();
    let quantum_residual = rms(settings.iter().flat_map(|s| {
        Outcome::BOTH.into_iter().flat_map(move |a| {
            Outcome::BOTH.into_iter().map(move |b| s.quad.get(a, b) - quantum_target(a, b, s.theta_ab))
        })
    }));
    Ok(GridpointRecord {
        index,
        parameter,
        holonomy: Some(hol),
        psi_minus: Some(wrap_pi(hol.theta_a1 - hol.theta_b1)),
        settings,
        chsh: Some(chsh),
        quantum_residual: Some(quantum_residual),
        mc_cells_passing: (spec.mc_samples > 0).then_some(passing),
        error: None,
    })
}

/// Runs every gridpoint, in parallel on `threads` workers. A gridpoint that
/// fails is recorded with its error and the sweep continues. The report
/// depends only on the spec.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepReport, ScanError> {
    spec.validate()?;
    let theta_v = spec.theta_v.distribution()?;
    let (gridpoints, inverse) = install(threads, || {
        let gridpoints: Vec<GridpointRecord> = spec
            .grid
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                run_gridpoint(spec, &theta_v, i, *p).unwrap_or_else(|e| GridpointRecord {
                    index: i,
                    parameter: *p,
                    holonomy: None,
                    psi_minus: None,
                    settings: Vec::new(),
                    chsh: None,
                    quantum_residual: None,
                    mc_cells_passing: None,
                    error: Some(e.to_string()),
                })
            })
            .collect();
        let inverse = spec.inverse.then(|| {
            let c = &spec.chsh;
            let problem = InverseProblem::new(vec![c.a - c.b, c.a - c.b_prime, c.a_prime - c.b, c.a_prime - c.b_prime]);
            let solution = match solve_nnls(&problem) {
                Ok(s) => s,
                Err(InverseError::NoConvergence { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            InverseReport::new(&problem, &solution)
        });
        (gridpoints, inverse)
    });
    Ok(SweepReport {
        provenance: Provenance {
            config_hash: spec.config_hash(),
            seed: spec.seed,
            code_version: CODE_VERSION.to_string(),
            perturbation_scheme: PERTURBATION_SCHEME,
        },
        spec: spec.clone(),
        failures: gridpoints.iter().filter(|g| g.error.is_some()).count(),
        gridpoints,
        inverse: inverse.transpose()?,
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    index: usize,
    parameter: f64,
    psi_minus: Option<f64>,
    theta_ab: Option<f64>,
    #[serde(rename = "A")]
    a: Option<i8>,
    #[serde(rename = "B")]
    b: Option<i8>,
    method: Option<&'a str>,
    value: Option<f64>,
    stderr: Option<f64>,
    chsh: Option<f64>,
    error: Option<&'a str>,
}

/// One row per gridpoint, setting, outcome pair and method; failed
/// gridpoints get a single row carrying the error.
pub fn write_sweep_csv<W: std::io::Write>(report: &SweepReport, w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for g in &report.gridpoints {
        let base = CsvRow {
            index: g.index,
            parameter: g.parameter,
            psi_minus: g.psi_minus,
            theta_ab: None,
            a: None,
            b: None,
            method: None,
            value: None,
            stderr: None,
            chsh: g.chsh,
            error: g.error.as_deref(),
        };
        if g.settings.is_empty() {
            wtr.serialize(&base)?;
        }
        for s in &g.settings {
            let methods = [
                ("closed", s.closed.as_ref(), None),
                ("quad", Some(&s.quad), None),
                ("mc", s.mc.as_ref().map(|m| &m.probabilities), s.mc.as_ref().map(|m| &m.stderr)),
            ];
            for (name, p, se) in methods {
                let Some(p) = p else { continue };
                for a in Outcome::BOTH {
                    for b in Outcome::BOTH {
                        wtr.serialize(CsvRow {
                            theta_ab: Some(s.theta_ab),
                            a: Some(a.value()),
                            b: Some(b.value()),
                            method: Some(name),
                            value: Some(p.get(a, b)),
                            stderr: se.map(|x| x.get(a, b)),
                            ..base
                        })?;
                    }
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Random weak-field bumps on a flat background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub max_mass: f64,
    pub softening: f64,
    pub center: [f64; 3],
    pub spread: f64,
}

impl PerturbationSpec {
    /// The bump of draw `i`.
    pub fn draw(&self, seed: u64, i: u64) -> WeakField {
        let mut rng = batch_rng(seed, i);
        let mass = self.max_mass * uniform01(&mut rng);
        let center = self.center.map(|c| c + self.spread * (2.0 * uniform01(&mut rng) - 1.0));
        WeakField { mass, softening: self.softening, center }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPsi {
    pub distribution: AngleDistribution,
    /// `ψ₋` of every successful draw, in draw order.
    pub samples: Vec<f64>,
    pub failures: usize,
    pub mean: f64,
    /// Standard error of `mean`.
    pub stderr: f64,
}

/// Builds the geometry for `n_draws` perturbed spacetimes and bins the
/// resulting `ψ₋ = θ_A1 − θ_B1`. Failed builds are skipped and counted.
pub fn empirical_psi_distribution(
    config: &ExperimentConfig,
    perturbation: &PerturbationSpec,
    n_draws: usize,
    bins: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<EmpiricalPsi, ScanError> {
    if n_draws < MIN_PSI_DRAWS {
        return Err(ScanError::TooFewDraws { n: n_draws, min: MIN_PSI_DRAWS });
    }
    if !(perturbation.max_mass >= 0.0 && perturbation.spread >= 0.0 && perturbation.softening > 0.0) {
        return Err(ScanError::InvalidSpec("perturbation sizes must be non-negative, softening positive".into()));
    }
    config.validate()?;
    let results: Vec<Option<f64>> = install(threads, || {
        (0..n_draws as u64)
            .into_par_iter()
            .map(|i| {
                let st = Spacetime::weak_field(perturbation.draw(seed, i));
                let geom = build_geometry(&st, config).ok()?;
                let hol = decompose_holonomy(&st, &geom).ok()?;
                Some(wrap_pi(hol.theta_a1 - hol.theta_b1))
            })
            .collect()
    });
    let samples: Vec<f64> = results.iter().flatten().copied().collect();
    let failures = n_draws - samples.len();
    if failures as f64 > MAX_FAILURE_FRACTION * n_draws as f64 {
        return Err(ScanError::TooManyFailures { failed: failures, total: n_draws });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(EmpiricalPsi {
        distribution: AngleDistribution::histogram(bins, &samples)?,
        samples,
        failures,
        mean,
        stderr: (var / n).sqrt(),
    })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    AngleDistribution, DynamicsError, JointAngleDistribution, Outcome, OutcomeProbabilities, PeContext,
    ResponseFunction,
};
use crate::rng::{batch_rng, entropy_seed, uniform01};

pub const MIN_MC_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub seed: Option<u64>,
    pub n_samples: u64,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
    /// Refuse to run without an explicit seed.
    #[serde(default = "default_true")]
    pub reproducible: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_batch() -> u64 {
    1 << 14
}

fn default_true() -> bool {
    true
}

impl McConfig {
    pub fn seeded(seed: u64, n_samples: u64) -> Self {
        Self { seed: Some(seed), n_samples, batch_size: default_batch(), reproducible: true, threads: None }
    }
}

/// Source of the first-loop holonomy angles.
#[derive(Debug, Clone, PartialEq)]
pub enum HolonomySampler {
    /// `ψ₋` drawn from the distribution and carried entirely by `θ_A1`.
    Psi(AngleDistribution),
    Joint(JointAngleDistribution),
    Fixed {
        theta_a1: f64,
        theta_b1: f64,
    },
}

impl HolonomySampler {
    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> (f64, f64) {
        match self {
            HolonomySampler::Psi(d) => (d.sample(rng), 0.0),
            HolonomySampler::Joint(j) => j.sample(rng),
            HolonomySampler::Fixed { theta_a1, theta_b1 } => (*theta_a1, *theta_b1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub probabilities: OutcomeProbabilities,
    /// Binomial standard errors `sqrt(p(1 − p)/n)`.
    pub stderr: OutcomeProbabilities,
    pub n_samples: u64,
    pub seed: u64,
}

/// Frequency estimate of the four outcome probabilities. Angles are drawn per
/// sample and the two outcomes independently given the angles. Samples are
/// split into fixed batches, each with its own `(seed, batch)` stream, and
/// integer counts are summed, so the estimate does not depend on the number
/// of workers.
pub fn mc_probability(
    cfg: &McConfig,
    theta_v: &AngleDistribution,
    holonomy: &HolonomySampler,
    response: &ResponseFunction,
    theta_a: f64,
    theta_b: f64,
) -> Result<McEstimate, DynamicsError> {
    if cfg.n_samples < MIN_MC_SAMPLES {
        return Err(DynamicsError::TooFewSamples { n: cfg.n_samples, min: MIN_MC_SAMPLES });
    }
    let seed = match (cfg.seed, cfg.reproducible) {
        (Some(s), _) => s,
        (None, true) => return Err(DynamicsError::SeedRequired),
        (None, false) => entropy_seed(),
    };
    let batch = cfg.batch_size.max(1);
    let n_batches = cfg.n_samples.div_ceil(batch);
    let run_batch = |b: u64| -> [u64; 4] {
        let mut rng = batch_rng(seed, b);
        let count = batch.min(cfg.n_samples - b * batch);
        let mut c = [0u64; 4];
        for _ in 0..count {
            let v = theta_v.sample(&mut rng);
            let (h1, h2) = holonomy.draw(&mut rng);
            let ctx = PeContext::new(theta_a, theta_b, v, h1, h2);
            let a_plus = uniform01(&mut rng) < response.eval(Outcome::Plus, ctx.base_a);
            let b_plus = uniform01(&mut rng) < response.eval(Outcome::Plus, ctx.base_b);
            c[(usize::from(!a_plus) << 1) | usize::from(!b_plus)] += 1;
        }
        c
    };
    let sum = |a: [u64; 4], b: [u64; 4]| std::array::from_fn(|k| a[k] + b[k]);
    let tally = || (0..n_batches).into_par_iter().map(run_batch).reduce(|| [0; 4], sum);
    let counts = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map(|pool| pool.install(tally))
            .unwrap_or_else(|_| tally()),
        None => tally(),
    };
    let n = cfg.n_samples as f64;
    let p: [f64; 4] = std::array::from_fn(|k| counts[k] as f64 / n);
    let se: [f64; 4] = std::array::from_fn(|k| (p[k] * (1.0 - p[k]) / n).sqrt());
    Ok(McEstimate {
        probabilities: OutcomeProbabilities { pp: p[0], pm: p[1], mp: p[2], mm: p[3] },
        stderr: OutcomeProbabilities { pp: se[0], pm: se[1], mp: se[2], mm: se[3] },
        n_samples: cfg.n_samples,
        seed,
    })
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use curved_chsh::dynamics::{
    iv_closed_form, iv_quadrature, mc_probability, simp_probabilities, write_records_csv, AngleDistribution,
    HolonomySampler, McConfig, Method, Outcome, OutcomeProbabilities, ProbabilityRecord, ResponseFunction,
};
use curved_chsh::geometry::Spacetime;
use curved_chsh::inverse::{solve_nnls, write_density_csv, InverseError, InverseReport};
use curved_chsh::rng::{batch_rng, derive_seed};
use curved_chsh::scan::{run_sweep, write_sweep_csv};
use curved_chsh::scenario::{build_geometry, decompose_holonomy, extract_angles, AngleSet, ExperimentConfig};
use curved_chsh::worldviews::{
    build_worldviews, check_consistency, check_heyting_laws, event_algebra_functor, measurement_instance,
    measurement_scenario, parse_dag_spec, Configuration, ConsistencyOptions, ConsistencyReport, GlobalMeasure,
    HeytingReport, MeasurementReport, MeasurementRule, PointMeasure,
};
use curved_chsh::CODE_VERSION;

use crate::config::{Config, Format, MeasureConfig, PsiSpec};
use crate::error::{exit, CliError};

/// A validated config with everything needed to run it.
pub struct Context {
    pub config: Config,
    /// Directory of the config file, for relative paths.
    pub base: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    code_version: &'a str,
    config_hash: String,
    seed: Option<u64>,
}

impl Context {
    fn provenance(&self) -> Provenance<'static> {
        let json = serde_json::to_string(&self.config).expect("config serialises");
        Provenance {
            code_version: CODE_VERSION,
            config_hash: hex::encode(Sha256::digest(json.as_bytes())),
            seed: self.config.seed,
        }
    }

    fn require<'a, T>(&self, block: &'a Option<T>, name: &str, target: &str) -> Result<&'a T, CliError> {
        block.as_ref().ok_or_else(|| CliError::schema(name, format!("block required for `run {target}`")))
    }

    pub fn geometry_inputs(&self, target: &str) -> Result<(Spacetime, &ExperimentConfig), CliError> {
        let st = self.require(&self.config.spacetime, "spacetime", target)?.build(&self.base)?;
        Ok((st, self.require(&self.config.scenario, "scenario", target)?))
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = &self.config.output.dir;
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(dir)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out_dir()?.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        if !self.config.output.wants(Format::Json) {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).expect("report serialises");
        text.push('\n');
        let path = self.out_dir()?.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    fn write_csv(&self, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<(), String>) -> Result<(), CliError> {
        if !self.config.output.wants(Format::Csv) {
            return Ok(());
        }
        let w = self.create(name)?;
        f(w).map_err(|m| CliError::io(format!("writing {name}"), std::io::Error::other(m)))
    }

    /// Effective config after overrides, so the run can be repeated.
    pub fn write_resolved(&self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&self.config).expect("config serialises");
        text.push('\n');
        let path = self.out_dir()?.join("config.resolved.json");
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }
}

fn csv_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn geometry(ctx: &Context) -> Result<i32, CliError> {
    let (st, cfg) = ctx.geometry_inputs("geometry")?;
    let geom = build_geometry(&st, cfg)?;
    let report = geom.report(&st)?;
    let mut angles: Vec<AngleSet> = Vec::new();
    for i in 0..cfg.dirs_a.len() {
        for j in 0..cfg.dirs_b.len() {
            angles.push(extract_angles(&st, &geom, i, j, 0.0)?);
        }
    }
    #[derive(Serialize)]
    struct Out<'a> {
        provenance: Provenance<'a>,
        report: &'a curved_chsh::scenario::GeometryReport,
        angles: &'a [AngleSet],
    }
    ctx.write_json("geometry.json", &Out { provenance: ctx.provenance(), report: &report, angles: &angles })?;
    ctx.write_csv("angles.csv", |w| {
        let mut wtr = csv_writer(w);
        for a in &angles {
            wtr.serialize(a).map_err(csv_err)?;
        }
        wtr.flush().map_err(csv_err)
    })?;
    let h = report.holonomy;
    println!(
        "geometry: theta_A1={:.6e} theta_A2={:.6e} theta_B1={:.6e} theta_B2={:.6e} psi_minus={:.6e}",
        h.theta_a1,
        h.theta_a2,
        h.theta_b1,
        h.theta_b2,
        angles.first().map_or(0.0, |a| a.psi_minus)
    );
    Ok(exit::OK)
}

fn csv_writer(w: BufWriter<File>) -> csv::Writer<BufWriter<File>> {
    csv::Writer::from_writer(w)
}

/// `ψ₋` either as an exact value or as a binned density.
enum Psi {
    Exact(f64),
    Binned(AngleDistribution),
}

pub fn probabilities(ctx: &Context) -> Result<i32, CliError> {
    let d = ctx.require(&ctx.config.dynamics, "dynamics", "probabilities")?;
    let psi = match &d.psi {
        PsiSpec::Geometry => {
            let (st, cfg) = ctx.geometry_inputs("probabilities")?;
            let hol = decompose_holonomy(&st, &build_geometry(&st, cfg)?)?;
            Psi::Exact(hol.theta_a1 - hol.theta_b1)
        }
        PsiSpec::PointMass { angle } => Psi::Exact(*angle),
        PsiSpec::Uniform { bins } => Psi::Binned(AngleDistribution::uniform(*bins)?),
        PsiSpec::Weights { weights } => Psi::Binned(AngleDistribution::from_weights(weights)?),
    };
    let theta_v = d.theta_v.distribution()?;
    let response = ResponseFunction::MalusClassical;
    let quad_at =
        |a, b, theta_ab: f64, x: f64| iv_quadrature(&response, &theta_v, a, b, theta_ab, 0.0, x, 0.0, d.nodes);
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (k, &theta_ab) in d.theta_ab.iter().enumerate() {
        let closed = theta_v.is_uniform().then(|| match &psi {
            Psi::Exact(x) => {
                OutcomeProbabilities::from_fn(|a, b| iv_closed_form(a, b, theta_ab + x + std::f64::consts::PI))
            }
            Psi::Binned(p) => simp_probabilities(p, theta_ab),
        });
        let mut quad = OutcomeProbabilities::default();
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                let v = match &psi {
                    Psi::Exact(x) => quad_at(a, b, theta_ab, *x)?,
                    Psi::Binned(p) => {
                        let mut s = 0.0;
                        for j in (0..p.bins()).filter(|j| p.mass(*j) > 0.0) {
                            s += p.mass(j) * quad_at(a, b, theta_ab, p.node(j))?;
                        }
                        s
                    }
                };
                set(&mut quad, a, b, v);
            }
        }
        let mc = match ctx.config.seed.filter(|_| d.mc_samples > 0) {
            Some(seed) => {
                let cfg =
                    McConfig { threads: ctx.threads, ..McConfig::seeded(derive_seed(seed, k as u64), d.mc_samples) };
                let sampler = match &psi {
                    Psi::Exact(x) => HolonomySampler::Fixed { theta_a1: *x, theta_b1: 0.0 },
                    Psi::Binned(p) => HolonomySampler::Psi(p.clone()),
                };
                Some(mc_probability(&cfg, &theta_v, &sampler, &response, theta_ab, 0.0)?)
            }
            None => None,
        };
        if let Some(c) = &closed {
            records.extend(ProbabilityRecord::from_probabilities(theta_ab, Method::Closed, c, None));
        }
        records.extend(ProbabilityRecord::from_probabilities(theta_ab, Method::Quad, &quad, None));
        if let Some(m) = &mc {
            records.extend(ProbabilityRecord::from_probabilities(
                theta_ab,
                Method::Mc,
                &m.probabilities,
                Some(&m.stderr),
            ));
        }
        let mut line = format!("probabilities: theta_ab={theta_ab:.6} p(++)");
        if let Some(c) = &closed {
            line += &format!(" closed={:.6}", c.pp);
        }
        line += &format!(" quad={:.6}", quad.pp);
        if let Some(m) = &mc {
            line += &format!(" mc={:.6}+-{:.6}", m.probabilities.pp, m.stderr.pp);
        }
        lines.push(line);
    }
    #[derive(Serialize)]
    struct Out<'a> {
        provenance: Provenance<'a>,
        psi_minus: Option<f64>,
        records: &'a [ProbabilityRecord],
    }
    let psi_minus = match psi {
        Psi::Exact(x) => Some(x),
        Psi::Binned(_) => None,
    };
    ctx.write_json("probabilities.json", &Out { provenance: ctx.provenance(), psi_minus, records: &records })?;
    ctx.write_csv("probabilities.csv", |w| write_records_csv(&records, w).map_err(csv_err))?;
    for l in lines {
        println!("{l}");
    }
    Ok(exit::OK)
}

fn set(p: &mut OutcomeProbabilities, a: Outcome, b: Outcome, v: f64) {
    match (a, b) {
        (Outcome::Plus, Outcome::Plus) => p.pp = v,
        (Outcome::Plus, Outcome::Minus) => p.pm = v,
        (Outcome::Minus, Outcome::Plus) => p.mp = v,
        (Outcome::Minus, Outcome::Minus) => p.mm = v,
    }
}

pub fn inverse(ctx: &Context) -> Result<i32, CliError> {
    let cfg = ctx.require(&ctx.config.inverse, "inverse", "inverse")?;
    let problem = cfg.problem();
    let (solution, converged) = match solve_nnls(&problem) {
        Ok(s) => (s, true),
        Err(InverseError::NoConvergence { best, .. }) => (*best, false),
        Err(e) => return Err(e.into()),
    };
    let report = InverseReport::new(&problem, &solution)?;
    #[derive(Serialize)]
    struct Out<'a> {
        provenance: Provenance<'a>,
        converged: bool,
        report: &'a InverseReport,
    }
    ctx.write_json("inverse.json", &Out { provenance: ctx.provenance(), converged, report: &report })?;
    ctx.write_csv("density.csv", |w| write_density_csv(&solution.density, w).map_err(csv_err))?;
    println!(
        "inverse: targets={} residual={:.6e} feasible={} lower_bound={:.6e} converged={converged}",
        problem.targets.len(),
        report.residual,
        report.feasible,
        report.fourier.lower_bound
    );
    Ok(if converged { exit::OK } else { exit::PARTIAL })
}

pub fn sweep(ctx: &Context) -> Result<i32, CliError> {
    let spec = ctx.require(&ctx.config.sweep, "sweep", "sweep")?;
    let report = run_sweep(spec, ctx.threads)?;
    ctx.write_json("sweep.json", &report)?;
    ctx.write_csv("sweep.csv", |w| write_sweep_csv(&report, w).map_err(csv_err))?;
    for g in &report.gridpoints {
        match (&g.error, g.psi_minus, g.chsh) {
            (Some(e), _, _) => println!("sweep: gridpoint {} parameter={} error: {e}", g.index, g.parameter),
            (None, Some(psi), Some(s)) => {
                println!("sweep: gridpoint {} parameter={} psi_minus={psi:.6e} S={s:.6}", g.index, g.parameter)
            }
            _ => {}
        }
    }
    if let Some(f) = report.mc_pass_fraction() {
        println!("sweep: monte carlo cells within 3 sigma: {:.1}%", 100.0 * f);
    }
    Ok(if report.failures > 0 { exit::PARTIAL } else { exit::OK })
}

#[derive(Serialize)]
struct PointRow {
    point: String,
    omega: usize,
    /// `log₂ |Λ_p|`.
    algebra_log2: usize,
    class: usize,
}

#[derive(Serialize)]
struct FunctorOut {
    class_of: Vec<usize>,
    omega_sizes: Vec<usize>,
    adjacency: Vec<(usize, usize)>,
    contravariant: bool,
    functorial: bool,
    violations: Vec<(String, String)>,
}

#[derive(Serialize)]
struct HeytingOut {
    class: usize,
    report: Option<HeytingReport>,
    error: Option<String>,
}

pub fn worldviews(ctx: &Context) -> Result<i32, CliError> {
    let w = ctx.require(&ctx.config.worldviews, "worldviews", "worldviews")?;
    let text = match (&w.dag, &w.dag_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => {
            let path = ctx.base.join(p);
            fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?
        }
        (None, None) => return Err(CliError::schema("worldviews.dag", "missing")),
    };
    let spec = parse_dag_spec(&text)?;
    let (dag, space) = (&spec.dag, &spec.space);
    let truth = match &w.truth {
        Some(values) => Configuration { values: values.clone() },
        None => space.zero(),
    };
    let all: Vec<usize> = (0..dag.len()).collect();
    let wvs = build_worldviews(dag, space, &truth, &all, w.state_cap)?;
    let chain: Vec<usize> = match &w.chain {
        Some(names) => names.iter().map(|n| dag.index(n)).collect::<Result<_, _>>()?,
        None => dag.greedy_chain(),
    };
    let global = match w.measure {
        MeasureConfig::UniformProduct => GlobalMeasure::uniform_product(space),
        MeasureConfig::RandomProduct => {
            GlobalMeasure::random_product(space, &mut batch_rng(ctx.config.seed.unwrap_or_default(), 0))
        }
    };
    let chain_wvs: Vec<_> = chain.iter().map(|p| wvs[*p].clone()).collect();
    let measures =
        chain_wvs.iter().map(|wv| PointMeasure::conditioned(&global, space, dag, wv)).collect::<Result<Vec<_>, _>>()?;
    let opts = ConsistencyOptions { max_support: w.max_support, ..Default::default() };
    let consistency = check_consistency(dag, space, &chain_wvs, &measures, &opts)?;
    let functor = event_algebra_functor(dag, &wvs)?;
    let heyting: Vec<HeytingOut> = (0..functor.omega_sizes.len())
        .map(|c| {
            let rep = functor.class_of.iter().position(|x| *x == c).unwrap_or(0);
            match functor.sieves_at(rep, w.sieve_cap) {
                Ok(alg) => HeytingOut { class: c, report: Some(check_heyting_laws(&alg)), error: None },
                Err(e) => HeytingOut { class: c, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let measurement = if w.measurement {
        let inst = measurement_instance();
        let copy = measurement_scenario(&inst, &[MeasurementRule::Copy, MeasurementRule::Copy])?;
        let compare = measurement_scenario(
            &inst,
            &[
                MeasurementRule::Compare { device_field: "chi1".into() },
                MeasurementRule::Compare { device_field: "chi2".into() },
            ],
        )?;
        Some([copy, compare])
    } else {
        None
    };
    let points: Vec<PointRow> = wvs
        .iter()
        .map(|wv| PointRow {
            point: dag.name(wv.point).to_string(),
            omega: wv.len(),
            algebra_log2: wv.algebra_size_log2(),
            class: functor.class_of[wv.point],
        })
        .collect();
    #[derive(Serialize)]
    struct Out<'a> {
        provenance: Provenance<'a>,
        chain: Vec<&'a str>,
        points: &'a [PointRow],
        consistency: &'a ConsistencyReport,
        functor: FunctorOut,
        heyting: &'a [HeytingOut],
        measurement: Option<[MeasurementReport; 2]>,
    }
    let out = Out {
        provenance: ctx.provenance(),
        chain: chain.iter().map(|p| dag.name(*p)).collect(),
        points: &points,
        consistency: &consistency,
        functor: FunctorOut {
            class_of: functor.class_of.clone(),
            omega_sizes: functor.omega_sizes.clone(),
            adjacency: functor.adjacency.clone(),
            contravariant: functor.contravariant,
            functorial: functor.functorial,
            violations: functor.violations.clone(),
        },
        heyting: &heyting,
        measurement,
    };
    ctx.write_json("worldviews.json", &out)?;
    ctx.write_csv("worldviews.csv", |wr| {
        let mut wtr = csv_writer(wr);
        for p in &points {
            wtr.serialize(p).map_err(csv_err)?;
        }
        wtr.flush().map_err(csv_err)
    })?;
    let flag = |b: bool| if b { "pass" } else { "fail" };
    println!(
        "worldviews: points={} chain={} spacelike_independence={} consistency={} conditional_independence={}",
        dag.len(),
        chain.len(),
        flag(consistency.spacelike_independence.passed),
        flag(consistency.consistency.passed),
        flag(consistency.conditional_independence.passed)
    );
    println!(
        "worldviews: algebra classes={} contravariant={} functorial={} heyting={}",
        functor.omega_sizes.len(),
        functor.contravariant,
        functor.functorial,
        flag(heyting.iter().all(|h| h.report.as_ref().is_some_and(|r| r.heyting())))
    );
    if let Some([copy, compare]) = &out.measurement {
        println!(
            "worldviews: measurement copy partitions_equal={} compare partitions_equal={}",
            copy.partitions_equal, compare.partitions_equal
        );
    }
    Ok(exit::OK)
}

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

use curved_chsh::dynamics::{AngleDistribution, Outcome};
use curved_chsh::inverse::ChshAngles;
use curved_chsh::scan::*;
use curved_chsh::scenario::ExperimentConfig;

fn weak_family() -> SpacetimeFamily {
    SpacetimeFamily::WeakField { softening: 0.5, center: [1.0, 0.5, 0.3] }
}

fn report_json(r: &SweepReport) -> String {
    serde_json::to_string_pretty(r).unwrap()
}

#[test]
fn flat_gridpoint_reproduces_planar_values() {
    let mut spec = SweepSpec::new(SpacetimeFamily::Minkowski, vec![0.0]);
    spec.chsh = ChshAngles { a: 0.0, a_prime: FRAC_PI_4, b: 0.0, b_prime: FRAC_PI_8 };
    let report = run_sweep(&spec, None).unwrap();
    let g = &report.gridpoints[0];
    assert!(g.error.is_none());
    let h = g.holonomy.unwrap();
    for t in [h.theta_a1, h.theta_a2, h.theta_b1, h.theta_b2] {
        assert!(t.abs() < 1e-9);
    }
    assert!(g.psi_minus.unwrap().abs() < 1e-9);
    let s0 = &g.settings[0];
    assert_eq!(s0.theta_ab, 0.0);
    // p(++) = p(−−) = 3/8 and p(+−) = p(−+) = 1/8, so E(0) = 1/2.
    let closed = s0.closed.unwrap();
    assert!((closed.pp - 0.375).abs() < 1e-9 && (closed.pm - 0.125).abs() < 1e-9);
    let e = 2.0 * closed.pp - 2.0 * closed.pm;
    assert!((s0.correlation - e).abs() < 1e-9 && (e - 0.5).abs() < 1e-9);
    for s in &g.settings {
        assert!((s.quad.sum() - 1.0).abs() < 1e-12);
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                assert!((s.quad.get(a, b) - s.closed.unwrap().get(a, b)).abs() < 1e-10);
            }
        }
        assert!((s.correlation - 0.5 * (2.0 * s.theta_ab).cos()).abs() < 1e-9);
    }
}

#[test]
fn flat_chsh_statistic_is_classical_maximum() {
    let report = run_sweep(&SweepSpec::new(SpacetimeFamily::Minkowski, vec![0.0, 1.0]), None).unwrap();
    for g in &report.gridpoints {
        let s = g.chsh.unwrap();
        assert!(s <= SQRT_2 + 1e-6);
        assert!((s - SQRT_2).abs() < 1e-9);
        assert!(g.quantum_residual.unwrap() > 0.01);
    }
    let inv = report.inverse.unwrap();
    assert_eq!(inv.targets.len(), 4);
}

#[test]
fn curved_gridpoints_cross_validate() {
    let mut spec = SweepSpec::new(weak_family(), vec![0.0, 0.01, 0.03]);
    spec.mc_samples = 200_000;
    spec.seed = Some(5);
    spec.inverse = false;
    let report = run_sweep(&spec, None).unwrap();
    assert_eq!(report.failures, 0);
    let psi: Vec<f64> = report.gridpoints.iter().map(|g| g.psi_minus.unwrap()).collect();
    assert!(psi[0].abs() < 1e-9 && psi[2].abs() > psi[1].abs() && psi[1].abs() > 0.0, "{psi:?}");
    for g in &report.gridpoints {
        for s in &g.settings {
            assert!((s.quad.sum() - 1.0).abs() < 1e-12);
            assert!((s.mc.unwrap().probabilities.sum() - 1.0).abs() < 1e-12);
            // Uniform θ_v: closed form and quadrature agree at any holonomy.
            let c = s.closed.unwrap();
            assert!((c.pp - s.quad.pp).abs() < 1e-10 && (c.mm - s.quad.mm).abs() < 1e-10);
        }
        assert!(g.chsh.unwrap() <= 2.0);
    }
    assert!(report.mc_pass_fraction().unwrap() >= 0.95);
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let mut spec = SweepSpec::new(weak_family(), vec![0.0, 0.02]);
    spec.mc_samples = 20_000;
    spec.seed = Some(9);
    let one = run_sweep(&spec, Some(1)).unwrap();
    let four = run_sweep(&spec, Some(4)).unwrap();
    assert_eq!(report_json(&one), report_json(&four));
    let csv = |r: &SweepReport| {
        let mut buf = Vec::new();
        write_sweep_csv(r, &mut buf).unwrap();
        buf
    };
    assert_eq!(csv(&one), csv(&four));
    assert_eq!(one.provenance.config_hash, spec.config_hash());
    assert_eq!(one.provenance.seed, Some(9));
    spec.seed = Some(10);
    assert_ne!(one.provenance.config_hash, spec.config_hash());
}

#[test]
fn failed_gridpoint_is_recorded() {
    let mut spec = SweepSpec::new(weak_family(), vec![0.0, 10.0]);
    spec.inverse = false;
    let report = run_sweep(&spec, None).unwrap();
    assert_eq!(report.failures, 1);
    assert!(report.gridpoints[0].error.is_none());
    assert!(report.gridpoints[1].error.is_some() && report.gridpoints[1].settings.is_empty());
    let mut buf = Vec::new();
    write_sweep_csv(&report, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("index,parameter,psi_minus,theta_ab,A,B,method,value,stderr,chsh,error\n"));
    // 4 settings × 2 methods × 4 pairs, plus the error row and the header.
    assert_eq!(text.lines().count(), 1 + 32 + 1);
}

#[test]
fn invalid_specs() {
    let empty = SweepSpec::new(SpacetimeFamily::Minkowski, vec![]);
    assert!(matches!(run_sweep(&empty, None), Err(ScanError::InvalidSpec(_))));
    let mut no_seed = SweepSpec::new(SpacetimeFamily::Minkowski, vec![0.0]);
    no_seed.mc_samples = 20_000;
    assert_eq!(run_sweep(&no_seed, None).unwrap_err(), ScanError::SeedRequired);
    let bad: Result<SweepSpec, _> = serde_json::from_str(r#"{"family":{"kind":"minkowski"},"grid":[0],"extra":1}"#);
    assert!(bad.is_err());
    let ok: SweepSpec = serde_json::from_str(r#"{"family":{"kind":"minkowski"},"grid":[0]}"#).unwrap();
    assert_eq!(ok, SweepSpec::new(SpacetimeFamily::Minkowski, vec![0.0]));
}

#[test]
fn unperturbed_ensemble_is_a_point_mass() {
    let p = PerturbationSpec { max_mass: 0.0, softening: 0.5, center: [0.0, 0.8, 0.0], spread: 0.5 };
    let e = empirical_psi_distribution(&ExperimentConfig::default(), &p, 100, 64, 3, None).unwrap();
    assert_eq!(e.failures, 0);
    assert!(e.samples.iter().all(|x| x.abs() < 1e-12));
    assert_eq!(e.distribution, AngleDistribution::point_mass(64, 0.0).unwrap());
}

#[test]
fn mirror_symmetric_ensemble_has_zero_mean() {
    // Centres symmetric under x → −x, which reverses every angle in m_O.
    let p = PerturbationSpec { max_mass: 0.05, softening: 0.5, center: [0.0, 0.8, 0.2], spread: 0.6 };
    let e = empirical_psi_distribution(&ExperimentConfig::default(), &p, 120, 64, 4, None).unwrap();
    assert_eq!(e.failures, 0);
    assert!(e.stderr > 0.0);
    assert!(e.mean.abs() < 3.0 * e.stderr, "mean {} stderr {}", e.mean, e.stderr);
    let d = &e.distribution;
    assert!((d.density().iter().sum::<f64>() * d.width() - 1.0).abs() < 1e-10);
    assert!(e.samples.iter().all(|x| x.abs() < PI));
}

#[test]
fn ensemble_errors() {
    let p = PerturbationSpec { max_mass: 0.01, softening: 0.5, center: [0.0; 3], spread: 0.1 };
    let cfg = ExperimentConfig::default();
    assert_eq!(
        empirical_psi_distribution(&cfg, &p, 50, 64, 1, None).unwrap_err(),
        ScanError::TooFewDraws { n: 50, min: 100 }
    );
    let heavy = PerturbationSpec { max_mass: 40.0, softening: 0.5, center: [1.0, 0.5, 0.3], spread: 0.1 };
    assert!(matches!(
        empirical_psi_distribution(&cfg, &heavy, 100, 64, 1, None),
        Err(ScanError::TooManyFailures { .. })
    ));
}

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, TAU};

use curved_chsh::dynamics::*;
use Outcome::{Minus, Plus};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol
}

fn pairs() -> [(Outcome, Outcome); 4] {
    [(Plus, Plus), (Plus, Minus), (Minus, Plus), (Minus, Minus)]
}

#[test]
fn closed_form_values() {
    assert!(close(iv_closed_form(Plus, Plus, 0.0), 0.375, 1e-15));
    assert!(close(iv_closed_form(Minus, Minus, 0.0), 0.375, 1e-15));
    assert!(close(iv_closed_form(Plus, Minus, 0.0), 0.125, 1e-15));
    for k in 0..50 {
        let t = -3.0 + 0.17 * k as f64;
        let s: f64 = pairs().iter().map(|(a, b)| iv_closed_form(*a, *b, t)).sum();
        assert!(close(s, 1.0, 1e-14));
    }
}

#[test]
fn quadrature_matches_closed_form_on_grid() {
    let uniform = AngleDistribution::uniform(64).unwrap();
    let r = ResponseFunction::MalusClassical;
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let theta_ab = TAU * i as f64 / 8.0 + 0.1;
            let psi = TAU * j as f64 / 8.0 - 0.3;
            for (a, b) in pairs() {
                let q = iv_quadrature(&r, &uniform, a, b, theta_ab, 0.0, psi, 0.0, DEFAULT_QUADRATURE_NODES).unwrap();
                worst = worst.max((q - iv_closed_form(a, b, theta_ab + psi + PI)).abs());
            }
        }
    }
    assert!(worst < 1e-10, "{worst}");
    let q = iv_quadrature(&r, &uniform, Plus, Plus, 0.0, 0.0, 0.0, 0.0, 2048).unwrap();
    assert!(close(q, 0.375, 1e-12));
}

#[test]
fn quadrature_rejects_low_resolution() {
    let uniform = AngleDistribution::uniform(8).unwrap();
    let r = ResponseFunction::MalusClassical;
    assert_eq!(
        iv_quadrature(&r, &uniform, Plus, Plus, 0.0, 0.0, 0.0, 0.0, 63),
        Err(DynamicsError::ResolutionTooLow { nodes: 63, min: 64 })
    );
    assert!(iv_quadrature(&r, &uniform, Plus, Plus, 0.0, 0.0, 0.0, 0.0, 64).is_ok());
}

#[test]
fn constituent_integrals() {
    // θ₊ = θ_A + θ_B moves with θ_v at rate −2; θ₋ does not move.
    for k in 0..16 {
        let base_a = 0.37 * k as f64;
        let base_b = 1.1 - 0.23 * k as f64;
        let theta_minus = base_a - base_b;
        let avg = |g: &dyn Fn(f64) -> f64| simpson_periodic(2048, g) / TAU;
        let plus = |v: f64| base_a + base_b - 2.0 * v;
        assert!(close(avg(&|v| plus(v).cos().powi(2)), 0.5, 1e-10));
        assert!(close(avg(&|v| plus(v).cos() * theta_minus.cos()), 0.0, 1e-10));
        assert!(close(avg(&|_| theta_minus.cos().powi(2)), theta_minus.cos().powi(2), 1e-10));
    }
}

#[test]
fn tabulated_malus_matches_closed_form() {
    let table = ResponseFunction::tabulate(4096, |t| t.cos().powi(2)).unwrap();
    let uniform = AngleDistribution::uniform(64).unwrap();
    for (theta_ab, psi) in [(0.0, 0.0), (0.7, -0.2), (2.0, 1.3), (-1.1, 3.0)] {
        for (a, b) in pairs() {
            let q = iv_quadrature(&table, &uniform, a, b, theta_ab, 0.0, psi, 0.0, 2048).unwrap();
            assert!(close(q, iv_closed_form(a, b, theta_ab + psi + PI), 1e-6));
        }
    }
}

#[test]
fn delta_like_theta_v_evaluates_directly() {
    let r = ResponseFunction::MalusClassical;
    let delta = AngleDistribution::point_mass(4096, 0.0).unwrap();
    for (ta, tb) in [(0.3, -0.4), (FRAC_PI_4, 0.0), (1.9, 2.7)] {
        for (a, b) in pairs() {
            let q = iv_quadrature(&r, &delta, a, b, ta, tb, 0.0, 0.0, 8192).unwrap();
            let direct = r.eval(a, ta) * r.eval(b, tb - PI);
            assert!(close(q, direct, 1e-5), "{q} vs {direct}");
        }
    }
}

#[test]
fn conditioned_dynamics_examples() {
    let r = ResponseFunction::MalusClassical;
    let zero = AngleDistribution::point_mass(32, 0.0).unwrap();
    let uniform = AngleDistribution::uniform(64).unwrap();
    let smooth = AngleDistribution::from_fn(48, |x| 1.2 + 0.8 * (x - 0.4).sin() + 0.3 * (3.0 * x).cos()).unwrap();
    let ctx = PeContext::new(0.4, -0.2, 0.1, 0.05, -0.3);
    for (a, b) in pairs() {
        let p = pe_probability(&r, &zero, &zero, a, b, &ctx);
        assert_eq!(p, r.eval(a, ctx.base_a) * r.eval(b, ctx.base_b));
        assert!(close(pe_probability(&r, &uniform, &uniform, a, b, &ctx), 0.25, 1e-12));
    }
    for d in [&zero, &uniform, &smooth] {
        let s: f64 = pairs().iter().map(|(a, b)| pe_probability(&r, d, &smooth, *a, *b, &ctx)).sum();
        assert!(close(s, 1.0, 1e-9));
    }
}

#[test]
fn conditioned_dynamics_factorizes_exactly() {
    let r = ResponseFunction::tabulate(256, |t| 0.5 + 0.45 * (2.0 * t).cos() * (0.5 + 0.5 * t.sin())).unwrap();
    let da = AngleDistribution::from_fn(40, |x| 1.0 + x.cos()).unwrap();
    let db = AngleDistribution::from_fn(40, |x| 2.0 + (2.0 * x).sin()).unwrap();
    for k in 0..20 {
        let ctx = PeContext::new(0.3 * k as f64, -0.1 * k as f64, 0.7, 0.2, -0.4);
        for (a, b) in pairs() {
            let joint = pe_probability(&r, &da, &db, a, b, &ctx);
            let product = pe_marginal(&r, &da, a, ctx.base_a) * pe_marginal(&r, &db, b, ctx.base_b);
            assert_eq!(joint.to_bits(), product.to_bits());
        }
    }
}

#[test]
fn sampled_outcomes_are_uncorrelated_at_fixed_angles() {
    let theta_v = AngleDistribution::point_mass(8, 0.0).unwrap();
    let cfg = McConfig::seeded(11, 400_000);
    let hol = HolonomySampler::Fixed { theta_a1: 0.3, theta_b1: -0.5 };
    let est = mc_probability(&cfg, &theta_v, &hol, &ResponseFunction::MalusClassical, 0.6, 0.1).unwrap();
    let p = est.probabilities;
    let (pa, pb) = (p.a_plus(), p.b_plus());
    let cov = p.pp - pa * pb;
    let sigma = (pa * (1.0 - pa) * pb * (1.0 - pb) / cfg.n_samples as f64).sqrt();
    assert!(cov.abs() < 3.0 * sigma, "cov {cov}, sigma {sigma}");
    let ctx = PeContext::new(0.6, 0.1, 0.0, 0.3, -0.5);
    assert!(close(pa, ctx.base_a.cos().powi(2), 5.0 * (pa * (1.0 - pa) / cfg.n_samples as f64).sqrt()));
}

#[test]
fn general_dynamics_reduces_to_closed_form() {
    let r = ResponseFunction::MalusClassical;
    let uniform = AngleDistribution::uniform(64).unwrap();
    let zero = AngleDistribution::point_mass(16, 0.0).unwrap();
    let joint = JointAngleDistribution::product(&zero, &zero).unwrap();
    for theta_ab in [0.0, 0.4, FRAC_PI_2, 2.5] {
        let p = po_probabilities(&r, &uniform, &joint, &zero, &zero, theta_ab, 0.0, 2048).unwrap();
        for (a, b) in pairs() {
            assert!(close(p.get(a, b), iv_closed_form(a, b, theta_ab + PI), 1e-10));
            let single = po_probability(&r, &uniform, &joint, &zero, &zero, a, b, theta_ab, 0.0, 2048).unwrap();
            assert_eq!(single, p.get(a, b));
        }
    }
}

#[test]
fn general_dynamics_reduces_to_simplified() {
    let r = ResponseFunction::MalusClassical;
    let uniform = AngleDistribution::uniform(64).unwrap();
    let zero = AngleDistribution::point_mass(16, 0.0).unwrap();
    let smooth = AngleDistribution::from_fn(32, |x| 1.0 + 0.9 * (x - 1.0).cos()).unwrap();

    let diag = JointAngleDistribution::diagonal(&smooth).unwrap();
    let psi_zero = AngleDistribution::point_mass(32, 0.0).unwrap();
    let banded_psi = AngleDistribution::from_fn(32, |x| 1.5 + (2.0 * x).sin() + 0.3 * x.cos()).unwrap();
    let banded = JointAngleDistribution::from_difference(&banded_psi).unwrap();

    for theta_ab in [0.0, FRAC_PI_8, 1.3, -2.2] {
        let p = po_probabilities(&r, &uniform, &diag, &zero, &zero, theta_ab, 0.0, 2048).unwrap();
        let s = simp_probabilities(&psi_zero, theta_ab);
        let q = po_probabilities(&r, &uniform, &banded, &zero, &zero, theta_ab, 0.0, 2048).unwrap();
        let t = simp_probabilities(&banded_psi, theta_ab);
        for (a, b) in pairs() {
            assert!(close(p.get(a, b), s.get(a, b), 1e-10));
            assert!(close(q.get(a, b), t.get(a, b), 1e-10));
        }
    }
}

#[test]
fn general_dynamics_normalized() {
    let r = ResponseFunction::MalusClassical;
    let theta_v = AngleDistribution::from_fn(64, |x| 1.0 + 0.5 * x.sin()).unwrap();
    let joint = JointAngleDistribution::from_fn(24, |x, y| 1.0 + 0.7 * (x - 2.0 * y).cos() + 0.2 * x.sin()).unwrap();
    let a2 = AngleDistribution::from_fn(16, |x| 1.0 + x.cos()).unwrap();
    let b2 = AngleDistribution::uniform(16).unwrap();
    let p = po_probabilities(&r, &theta_v, &joint, &a2, &b2, 0.3, -0.9, 256).unwrap();
    assert!(p.validate(1e-8), "{p:?}");
}

fn non_factorization_inputs() -> (AngleDistribution, JointAngleDistribution) {
    let theta_v = AngleDistribution::point_mass(256, 0.0).unwrap();
    let profile = AngleDistribution::from_fn(256, |t| 1.0 + (2.0 * t).cos()).unwrap();
    (theta_v, JointAngleDistribution::diagonal(&profile).unwrap())
}

#[test]
fn general_dynamics_does_not_factorize() {
    let r = ResponseFunction::MalusClassical;
    let zero = AngleDistribution::point_mass(8, 0.0).unwrap();
    let (theta_v, joint) = non_factorization_inputs();
    let p = po_probabilities(&r, &theta_v, &joint, &zero, &zero, FRAC_PI_8, -FRAC_PI_8, 2048).unwrap();
    let gap = p.pp - p.a_plus() * p.b_plus();
    // (1 + √2/2)/4 against (1/2 + √2/8)²
    let exact = 0.25 * (1.0 + 0.5 * 2f64.sqrt()) - (0.5 + 2f64.sqrt() / 8.0).powi(2);
    assert!(gap.abs() > 0.01, "{gap}");
    assert!(close(gap, exact, 1e-4), "{gap} vs {exact}");
    let (ma, mb) = po_marginals(&r, &theta_v, &joint, &zero, &zero, FRAC_PI_8, -FRAC_PI_8, 2048).unwrap();
    assert_eq!((ma, mb), (p.a_plus(), p.b_plus()));

    // A uniform θ_v removes the correlation: the marginals are then ½ for any holonomy.
    let uniform = AngleDistribution::uniform(64).unwrap();
    let u = po_probabilities(&r, &uniform, &joint, &zero, &zero, FRAC_PI_8, -FRAC_PI_8, 2048).unwrap();
    assert!(close(u.a_plus(), 0.5, 1e-12) && close(u.b_plus(), 0.5, 1e-12));
    assert!(close(u.pp, 0.25, 1e-12));
}

#[test]
fn simplified_dynamics_examples() {
    let zero = AngleDistribution::point_mass(64, 0.0).unwrap();
    assert!(close(simp_probability(&zero, Plus, Plus, 0.0), 0.375, 1e-15));
    let uniform = AngleDistribution::uniform(64).unwrap();
    let smooth = AngleDistribution::from_fn(64, |x| 2.0 + x.sin() + (2.0 * x).cos()).unwrap();
    for k in 0..20 {
        let t = 0.33 * k as f64;
        assert!(close(simp_probability(&uniform, Plus, Plus, t), 0.25, 1e-12));
        assert!(close(simp_probabilities(&smooth, t).sum(), 1.0, 1e-12));
    }
}

#[test]
fn monte_carlo_matches_closed_form() {
    let uniform = AngleDistribution::uniform(64).unwrap();
    let cfg = McConfig::seeded(2024, 1_000_000);
    let hol = HolonomySampler::Fixed { theta_a1: 0.0, theta_b1: 0.0 };
    let est = mc_probability(&cfg, &uniform, &hol, &ResponseFunction::MalusClassical, 0.0, 0.0).unwrap();
    let p = est.probabilities;
    assert!((p.pp - 0.375).abs() < 3.0 * est.stderr.pp, "{} ± {}", p.pp, est.stderr.pp);
    let counts = [p.pp, p.pm, p.mp, p.mm].map(|x| (x * cfg.n_samples as f64).round() as u64);
    assert_eq!(counts.iter().sum::<u64>(), cfg.n_samples);
}

#[test]
fn monte_carlo_is_deterministic_across_threads() {
    let uniform = AngleDistribution::uniform(64).unwrap();
    let psi = AngleDistribution::from_fn(32, |x| 1.0 + x.cos()).unwrap();
    let hol = HolonomySampler::Psi(psi);
    let r = ResponseFunction::MalusClassical;
    let mut cfg = McConfig::seeded(5, 100_000);
    cfg.threads = Some(1);
    let one = mc_probability(&cfg, &uniform, &hol, &r, 0.2, 0.9).unwrap();
    let again = mc_probability(&cfg, &uniform, &hol, &r, 0.2, 0.9).unwrap();
    cfg.threads = Some(4);
    let four = mc_probability(&cfg, &uniform, &hol, &r, 0.2, 0.9).unwrap();
    assert_eq!(one, again);
    assert_eq!(one, four);
    cfg.seed = Some(6);
    assert_ne!(one.probabilities, mc_probability(&cfg, &uniform, &hol, &r, 0.2, 0.9).unwrap().probabilities);
}

#[test]
fn monte_carlo_contract_errors() {
    let uniform = AngleDistribution::uniform(8).unwrap();
    let hol = HolonomySampler::Fixed { theta_a1: 0.0, theta_b1: 0.0 };
    let r = ResponseFunction::MalusClassical;
    let mut cfg = McConfig::seeded(1, 10_000);
    cfg.seed = None;
    assert_eq!(mc_probability(&cfg, &uniform, &hol, &r, 0.0, 0.0), Err(DynamicsError::SeedRequired));
    cfg.reproducible = false;
    assert!(mc_probability(&cfg, &uniform, &hol, &r, 0.0, 0.0).is_ok());
    let few = McConfig::seeded(1, 9_999);
    assert_eq!(
        mc_probability(&few, &uniform, &hol, &r, 0.0, 0.0),
        Err(DynamicsError::TooFewSamples { n: 9_999, min: MIN_MC_SAMPLES })
    );
}

#[test]
fn joint_sampler_follows_density() {
    let psi = AngleDistribution::point_mass(16, 3.0 * TAU / 16.0).unwrap();
    let joint = JointAngleDistribution::from_difference(&psi).unwrap();
    let uniform = AngleDistribution::uniform(64).unwrap();
    let cfg = McConfig::seeded(9, 200_000);
    let r = ResponseFunction::MalusClassical;
    let est = mc_probability(&cfg, &uniform, &HolonomySampler::Joint(joint), &r, 0.5, 0.0).unwrap();
    let expected = iv_closed_form(Plus, Plus, 0.5 + 3.0 * TAU / 16.0 + PI);
    assert!((est.probabilities.pp - expected).abs() < 4.0 * est.stderr.pp);
}

#[test]
fn quantum_target_values() {
    assert!(close(quantum_target(Plus, Plus, FRAC_PI_2), 0.25, 1e-15));
    assert!(close(quantum_target(Plus, Minus, 0.0), 0.5, 1e-15));
    for k in 0..100 {
        let t = 0.0731 * k as f64;
        assert!(close(quantum_probabilities(t).sum(), 1.0, 1e-12));
    }
}

#[test]
fn records_round_trip_through_csv() {
    let p = quantum_probabilities(0.5);
    let rows = ProbabilityRecord::from_probabilities(0.5, Method::Closed, &p, None);
    let mut buf = Vec::new();
    write_records_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("theta_ab,A,B,method,value,stderr\n"));
    assert_eq!(text.lines().count(), 5);
    let json = serde_json::to_string(&rows[1]).unwrap();
    assert!(json.contains("\"A\":1") && json.contains("\"B\":-1") && json.contains("\"method\":\"closed\""));
}

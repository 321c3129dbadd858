use std::collections::BTreeMap;

use curved_chsh::rng::batch_rng;
use curved_chsh::worldviews::*;

fn binary_space(n: usize) -> FieldConfigSpace {
    FieldConfigSpace::uniform(n, &["psi"], 2).unwrap()
}

fn all_worldviews(dag: &CausalDag, space: &FieldConfigSpace, truth: &Configuration) -> Vec<WorldviewTheory> {
    let pts: Vec<usize> = (0..dag.len()).collect();
    build_worldviews(dag, space, truth, &pts, DEFAULT_STATE_CAP).unwrap()
}

/// Reachability by depth-first search over the raw edges.
fn reach(dag: &CausalDag, p: usize, q: usize) -> bool {
    let mut stack = vec![p];
    let mut seen = vec![false; dag.len()];
    while let Some(x) = stack.pop() {
        if x == q {
            return true;
        }
        if !std::mem::replace(&mut seen[x], true) {
            stack.extend(dag.edges().iter().filter(|e| e.0 == x).map(|e| e.1));
        }
    }
    false
}

#[test]
fn causal_past_examples() {
    let dag = CausalDag::chain(3);
    assert_eq!(dag.causal_past("0").unwrap(), vec!["0"]);
    assert_eq!(dag.causal_past("2").unwrap(), vec!["0", "1", "2"]);
    assert_eq!(dag.causal_past("x"), Err(WorldviewError::UnknownPoint("x".into())));
    assert!(matches!(CausalDag::from_edges(2, &[(0, 1), (1, 0)]), Err(WorldviewError::Cycle(_))));
}

#[test]
fn causal_past_matches_search_and_is_monotone() {
    let mut rng = batch_rng(11, 0);
    let dag = CausalDag::random(50, 0.08, &mut rng);
    for p in 0..50 {
        for q in 0..50 {
            assert_eq!(dag.leq(p, q), reach(&dag, p, q), "{p} {q}");
            if dag.leq(p, q) {
                assert!(dag.past(p).is_subset(dag.past(q)));
            }
        }
    }
}

#[test]
fn sample_space_counts() {
    let chain = CausalDag::chain(3);
    let space = binary_space(3);
    let truth = Configuration { values: vec![vec![1, 0, 1]] };
    let top = build_worldview(&chain, &space, &truth, 2, DEFAULT_STATE_CAP).unwrap();
    assert_eq!(top.omega(), &[space.encode(&truth).unwrap()]);
    let anti = CausalDag::antichain(3);
    assert_eq!(build_worldview(&anti, &space, &truth, 0, DEFAULT_STATE_CAP).unwrap().len(), 4);
    let err = build_worldview(&anti, &space, &truth, 0, 3).unwrap_err();
    assert_eq!(err, WorldviewError::StateSpaceTooLarge { size: 4, cap: 3 });
}

#[test]
fn sample_spaces_match_brute_force_and_nest() {
    let mut rng = batch_rng(12, 0);
    for _ in 0..20 {
        let n = 7;
        let dag = CausalDag::random(n, 0.3, &mut rng);
        let space = binary_space(n);
        let truth = space.decode((curved_chsh::rng::uniform01(&mut rng) * 128.0) as u64);
        let wvs = all_worldviews(&dag, &space, &truth);
        for p in 0..n {
            let expected: Vec<u64> = (0..128u64)
                .filter(|id| dag.past(p).ones().all(|x| space.value(*id, 0, x) == truth.values[0][x]))
                .collect();
            assert_eq!(wvs[p].omega(), expected.as_slice());
            for q in 0..n {
                if dag.leq(p, q) {
                    assert!(wvs[p].includes(&wvs[q]));
                    assert!(wvs[p].algebra_includes(&wvs[q], 12));
                }
            }
        }
    }
}

#[test]
fn algebra_inclusion_detects_non_nested_spaces() {
    let dag = CausalDag::antichain(3);
    let space = binary_space(3);
    let wvs = all_worldviews(&dag, &space, &space.zero());
    assert!(!wvs[0].includes(&wvs[1]));
    assert!(!wvs[0].algebra_includes(&wvs[1], 12));
}

#[test]
fn events() {
    let dag = CausalDag::from_edges(3, &[(0, 1)]).unwrap();
    let space = binary_space(3);
    let truth = Configuration { values: vec![vec![1, 1, 0]] };
    let wv = build_worldview(&dag, &space, &truth, 1, DEFAULT_STATE_CAP).unwrap();
    assert_eq!(wv.len(), 2);
    assert_eq!(wv.event(&space, "psi", &[], &[]).unwrap().count(), wv.len());
    assert_eq!(wv.event(&space, "psi", &[0, 1], &[1, 1]).unwrap().count(), wv.len());
    assert!(wv.event(&space, "psi", &[0], &[0]).unwrap().is_empty());
    assert_eq!(wv.event(&space, "psi", &[2], &[1]).unwrap().count(), wv.len() / 2);
    assert_eq!(wv.event(&space, "chi", &[2], &[1]), Err(WorldviewError::UnknownField("chi".into())));
    let a = wv.event(&space, "psi", &[2], &[1]).unwrap();
    assert!(a.union(&a.complement()).same_members(&wv.full_event()));
    assert!(a.intersect(&a.complement()).is_empty());
}

#[test]
fn knowledge_depends_only_on_the_past() {
    // Two observers meeting at `o`, one going on to `l`, `t` and the other
    // to `r`, with different field values outside J⁻(o).
    let dag = CausalDag::new(["o", "l", "r", "t"].map(String::from).to_vec(), &[(0, 1), (1, 3), (0, 2)]).unwrap();
    let space = binary_space(4).with_observer().unwrap();
    let first = Configuration { values: vec![vec![0, 1, 0, 1], vec![1, 1, 0, 1]] };
    let second = Configuration { values: vec![vec![0, 0, 0, 0], vec![1, 0, 1, 0]] };
    let a = build_worldview(&dag, &space, &first, 0, DEFAULT_STATE_CAP).unwrap();
    let b = build_worldview(&dag, &space, &second, 0, DEFAULT_STATE_CAP).unwrap();
    assert_eq!(a, b);
    let bad = Configuration { values: vec![vec![0; 4], vec![0, 1, 1, 0]] };
    assert!(matches!(build_worldview(&dag, &space, &bad, 0, DEFAULT_STATE_CAP), Err(WorldviewError::InvalidConfig(_))));
}

fn measures(
    dag: &CausalDag,
    space: &FieldConfigSpace,
    wvs: &[WorldviewTheory],
    mu: &GlobalMeasure,
) -> Vec<PointMeasure> {
    wvs.iter().map(|w| PointMeasure::conditioned(mu, space, dag, w).unwrap()).collect()
}

#[test]
fn product_measures_pass_all_conditions() {
    let mut rng = batch_rng(13, 0);
    for _ in 0..20 {
        let dag = CausalDag::random(6, 0.35, &mut rng);
        let space = binary_space(6);
        let chain = dag.greedy_chain();
        let truth = space.zero();
        let wvs = build_worldviews(&dag, &space, &truth, &chain, DEFAULT_STATE_CAP).unwrap();
        let mu = GlobalMeasure::random_product(&space, &mut rng);
        let ms = measures(&dag, &space, &wvs, &mu);
        let opts = ConsistencyOptions { max_support: 2, ..Default::default() };
        let report = check_consistency(&dag, &space, &wvs, &ms, &opts).unwrap();
        assert!(report.all_passed(), "{report:?}");
    }
}

#[test]
fn correlated_diamond_fails_spacelike_independence() {
    let dag = CausalDag::diamond();
    let space = binary_space(4);
    let mut weights = BTreeMap::new();
    for id in 0..16u64 {
        if space.value(id, 0, 1) == space.value(id, 0, 2) {
            weights.insert(id, 1.0 / 8.0);
        }
    }
    let mu = GlobalMeasure::Table { weights };
    mu.validate(&space).unwrap();
    let wvs = build_worldviews(&dag, &space, &space.zero(), &[0], DEFAULT_STATE_CAP).unwrap();
    let ms = measures(&dag, &space, &wvs, &mu);
    let report = check_consistency(&dag, &space, &wvs, &ms, &ConsistencyOptions::default()).unwrap();
    assert!(!report.spacelike_independence.passed);
    let w = report.spacelike_independence.witness.unwrap();
    assert_eq!(w.point, "bottom");
    assert_eq!(w.event_a.support, vec!["left"]);
    assert_eq!(w.event_b.unwrap().support, vec!["right"]);
    // P(ψ_l = ψ_r = v) = 1/2 against 1/4 under independence.
    assert!((w.lhs - 0.5).abs() < 1e-12 && (w.rhs - 0.25).abs() < 1e-12);
}

#[test]
fn single_point_passes_vacuously() {
    let dag = CausalDag::chain(1);
    let space = binary_space(1);
    let wvs = build_worldviews(&dag, &space, &space.zero(), &[0], DEFAULT_STATE_CAP).unwrap();
    let ms = measures(&dag, &space, &wvs, &GlobalMeasure::uniform_product(&space));
    let report = check_consistency(&dag, &space, &wvs, &ms, &ConsistencyOptions::default()).unwrap();
    assert!(report.all_passed());
    assert_eq!(report.spacelike_independence.checked, 0);
    assert_eq!(report.consistency.checked, 0);
}

#[test]
fn inconsistent_family_fails_consistency() {
    let dag = CausalDag::chain(3);
    let space = binary_space(3);
    let wvs = build_worldviews(&dag, &space, &space.zero(), &[0, 1], DEFAULT_STATE_CAP).unwrap();
    let mut ms = measures(&dag, &space, &wvs, &GlobalMeasure::uniform_product(&space));
    assert_eq!(wvs[1].len(), 2);
    ms[1] = PointMeasure::new(&wvs[1], vec![0.9, 0.1]).unwrap();
    let report = check_consistency(&dag, &space, &wvs, &ms, &ConsistencyOptions::default()).unwrap();
    assert!(!report.consistency.passed);
    let w = report.consistency.witness.unwrap();
    assert!((w.lhs - 0.9).abs() < 1e-12 && (w.rhs - 0.5).abs() < 1e-12);
}

#[test]
fn zero_mass_is_reported() {
    let dag = CausalDag::chain(2);
    let space = binary_space(2);
    let wvs = build_worldviews(&dag, &space, &space.zero(), &[0, 1], DEFAULT_STATE_CAP).unwrap();
    // All mass on ψ(1) = 1, which the observer at 1 knows is false.
    let mu = GlobalMeasure::Table { weights: BTreeMap::from([(2, 1.0)]) };
    assert_eq!(
        PointMeasure::conditioned(&mu, &space, &dag, &wvs[1]),
        Err(WorldviewError::ZeroConditioningMass { point: "1".into() })
    );
    let p0 = PointMeasure::conditioned(&mu, &space, &dag, &wvs[0]).unwrap();
    let p1 = PointMeasure::new(&wvs[1], vec![1.0]).unwrap();
    let report = check_consistency(&dag, &space, &wvs, &[p0.clone(), p1], &ConsistencyOptions::default()).unwrap();
    assert!(report.consistency.passed);
    assert_eq!(report.zero_mass.len(), 1);
    assert_eq!(report.zero_mass[0].condition, 2);
    let given = wvs[0].restriction_event(&wvs[1]);
    assert!(matches!(
        p0.conditional(&wvs[0].full_event(), &given, &dag),
        Err(WorldviewError::ZeroConditioningMass { .. })
    ));
}

#[test]
fn measurement_copy_and_compare() {
    let inst = measurement_instance();
    let same = measurement_scenario(&inst, &[MeasurementRule::Copy, MeasurementRule::Copy]).unwrap();
    // Seven free binary slots: ψ off p0, χ1(p1), χ2(p2).
    assert_eq!(same.omega, 128);
    assert!(same.partitions_equal && same.partitions_valid == [true, true]);
    assert_eq!(same.partition_sizes, [[64, 64], [64, 64]]);
    let rules = [
        MeasurementRule::Compare { device_field: "chi1".into() },
        MeasurementRule::Compare { device_field: "chi2".into() },
    ];
    let diff = measurement_scenario(&inst, &rules).unwrap();
    assert!(!diff.partitions_equal && diff.partitions_valid == [true, true]);
    let w = diff.witness.unwrap();
    assert_ne!(w.values[1][4], w.values[2][5]);
    assert_eq!(w.values[1][0], w.values[2][0]);
    // Outcomes disagree exactly when the devices disagree.
    let (phi1, phi2) = (w.values[3][4], w.values[4][5]);
    assert_eq!(phi1, (w.values[0][1] + w.values[1][4]) % 2);
    assert_eq!(phi2, (w.values[0][1] + w.values[2][5]) % 2);

    let mut bad = measurement_instance();
    bad.roles.p2 = 2;
    assert!(matches!(measurement_scenario(&bad, &rules), Err(WorldviewError::ShapeMismatch(_))));
}

fn brute_sieves(poset: &FinitePoset, x: usize) -> Vec<u64> {
    let down: Vec<usize> = poset.down_set(x).ones().collect();
    let mut out = Vec::new();
    for sub in 0u64..(1 << down.len()) {
        let set: Vec<usize> = (0..down.len()).filter(|i| sub >> i & 1 == 1).map(|i| down[i]).collect();
        let closed = set.iter().all(|&a| down.iter().all(|&b| !poset.leq(b, a) || set.contains(&b)));
        if closed {
            out.push(set.iter().fold(0, |m, i| m | 1 << i));
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn small_sieve_algebras() {
    let one = sieves(&FinitePoset::chain(1), 0, DEFAULT_SIEVE_CAP).unwrap();
    assert_eq!(one.elements(), &[0, 1]);
    let r = check_heyting_laws(&one);
    assert!(r.heyting() && r.boolean);

    let two = sieves(&FinitePoset::chain(2), 1, DEFAULT_SIEVE_CAP).unwrap();
    assert_eq!(two.elements(), &[0b00, 0b01, 0b11]);
    let r = check_heyting_laws(&two);
    assert!(r.heyting() && !r.boolean);
    let middle = 0b01;
    assert_eq!(two.neg(middle), 0);
    assert_ne!(two.neg(two.neg(middle)), middle);

    let err = sieves(&FinitePoset::chain(5), 4, 3).unwrap_err();
    assert_eq!(err, WorldviewError::PosetTooLarge { size: 5, cap: 3 });
}

#[test]
fn random_posets_satisfy_heyting_laws() {
    let mut rng = batch_rng(14, 0);
    for _ in 0..50 {
        let poset = FinitePoset::random(6, 0.4, &mut rng);
        for x in 0..6 {
            let alg = sieves(&poset, x, DEFAULT_SIEVE_CAP).unwrap();
            assert_eq!(alg.elements(), brute_sieves(&poset, x).as_slice());
            let r = check_heyting_laws(&alg);
            assert!(r.heyting(), "{r:?}");
            // Implication is the largest sieve c with c ∧ a ≤ b.
            for &a in alg.elements() {
                for &b in alg.elements() {
                    let best = alg.elements().iter().filter(|c| *c & a & !b == 0).fold(0, |m, c| m | c);
                    assert_eq!(alg.implies(a, b), best);
                }
            }
        }
    }
}

#[test]
fn functor_on_chain_and_antichain() {
    let chain = CausalDag::chain(3);
    let space = binary_space(3);
    let f = event_algebra_functor(&chain, &all_worldviews(&chain, &space, &space.zero())).unwrap();
    let sizes: Vec<usize> = (0..3).map(|p| f.omega_sizes[f.class_of[p]]).collect();
    assert_eq!(sizes, vec![4, 2, 1]);
    assert!(f.contravariant && f.functorial);
    // Λ_2 ⊂ Λ_1 ⊂ Λ_0 is itself a 3-chain.
    let top = f.sieves_at(0, DEFAULT_SIEVE_CAP).unwrap();
    assert_eq!(top.len(), 4);

    let anti = CausalDag::antichain(3);
    let f = event_algebra_functor(&anti, &all_worldviews(&anti, &space, &space.zero())).unwrap();
    assert_eq!(f.omega_sizes, vec![4, 4, 4]);
    assert!(f.adjacency.is_empty() && f.contravariant);
}

#[test]
fn functor_on_random_dags() {
    let mut rng = batch_rng(15, 0);
    for _ in 0..10 {
        let dag = CausalDag::random(8, 0.3, &mut rng);
        let space = binary_space(8);
        let f = event_algebra_functor(&dag, &all_worldviews(&dag, &space, &space.zero())).unwrap();
        assert!(f.contravariant && f.functorial, "{:?}", f.violations);
        for p in 0..8 {
            let alg = f.sieves_at(p, DEFAULT_SIEVE_CAP).unwrap();
            assert!(check_heyting_laws(&alg).heyting());
        }
    }
}

#[test]
fn parse_edge_list() {
    let text = "# fig\npoint p0\np0 R\nR p1\nR p2\nfield psi 2\nfield chi 1\nalphabet chi p1 3\n";
    let spec = parse_dag_spec(text).unwrap();
    assert_eq!(spec.dag.names(), &["p0", "R", "p1", "p2"]);
    assert!(spec.dag.leq(0, 3) && spec.dag.spacelike(2, 3));
    assert_eq!(spec.space.fields()[1].alphabets, vec![1, 1, 3, 1]);
    assert!(matches!(parse_dag_spec("a b c d e"), Err(WorldviewError::Parse { line: 1, .. })));
    assert!(matches!(parse_dag_spec("field x 0"), Err(WorldviewError::Parse { line: 1, .. })));
    assert!(matches!(parse_dag_spec("a b\nb a"), Err(WorldviewError::Cycle(_))));
    assert!(matches!(parse_dag_spec("a b\nalphabet y a 2"), Err(WorldviewError::Parse { line: 2, .. })));
}

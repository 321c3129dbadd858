use serde::Serialize;

use super::{build_worldview, CausalDag, Configuration, Field, FieldConfigSpace, WorldviewError, DEFAULT_STATE_CAP};

/// How an observer's binary outcome field at its measurement point is fixed
/// by the signal from the observed region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum MeasurementRule {
    /// Outcome is the source value at the region, mod 2.
    Copy,
    /// Outcome is the source value plus the observer's device field at its
    /// measurement point, mod 2.
    Compare { device_field: String },
}

/// Points of the two-observer shape `p0 ≤ region ≤ p1, p2` with `p1 ∥ p2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurementRoles {
    pub p0: usize,
    pub region: usize,
    pub p1: usize,
    pub p2: usize,
    /// Observed field.
    pub source: String,
    /// Binary outcome fields of the two observers.
    pub outcomes: [String; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementInstance {
    pub dag: CausalDag,
    pub space: FieldConfigSpace,
    pub truth: Configuration,
    pub roles: MeasurementRoles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementReport {
    /// Lawful configurations in `Ω_{p0}`.
    pub omega: usize,
    /// `|E⁺|, |E⁻|` for each observer.
    pub partition_sizes: [[usize; 2]; 2],
    /// `E⁺ ⊔ E⁻ = Ω` for each observer.
    pub partitions_valid: [bool; 2],
    pub partitions_equal: bool,
    /// A lawful configuration on which the two outcomes disagree.
    pub witness: Option<Configuration>,
}

/// Six points `p0 < R < g1 < p1`, `R < g2 < p2`, with a binary source field
/// `psi`, device fields `chi1` (live at `p0`, `p1`) and `chi2` (live at
/// `p0`, `p2`), and outcome fields `phi1` at `p1` and `phi2` at `p2`. Fields
/// are constant (alphabet 1) where they are not live. The true configuration
/// is all zeros, so the devices agree at `p0`.
pub fn measurement_instance() -> MeasurementInstance {
    let names = ["p0", "R", "g1", "g2", "p1", "p2"].map(String::from).to_vec();
    let dag = CausalDag::new(names, &[(0, 1), (1, 2), (1, 3), (2, 4), (3, 5)]).expect("acyclic");
    let live = |pts: &[usize]| (0..6).map(|p| if pts.contains(&p) { 2 } else { 1 }).collect::<Vec<u32>>();
    let field = |name: &str, alphabets| Field { name: name.into(), alphabets };
    let space = FieldConfigSpace::new(
        6,
        vec![
            field("psi", vec![2; 6]),
            field("chi1", live(&[0, 4])),
            field("chi2", live(&[0, 5])),
            field("phi1", live(&[4])),
            field("phi2", live(&[5])),
        ],
    )
    .expect("small space");
    let truth = space.zero();
    let roles = MeasurementRoles {
        p0: 0,
        region: 1,
        p1: 4,
        p2: 5,
        source: "psi".into(),
        outcomes: ["phi1".into(), "phi2".into()],
    };
    MeasurementInstance { dag, space, truth, roles }
}

fn check_shape(dag: &CausalDag, r: &MeasurementRoles) -> Result<(), WorldviewError> {
    let n = dag.len();
    if [r.p0, r.region, r.p1, r.p2].iter().any(|p| *p >= n) {
        return Err(WorldviewError::ShapeMismatch("role point outside the order".into()));
    }
    if !dag.leq(r.p0, r.region) || !dag.leq(r.region, r.p1) || !dag.leq(r.region, r.p2) {
        return Err(WorldviewError::ShapeMismatch("need p0 ≤ R ≤ p1 and R ≤ p2".into()));
    }
    if !dag.spacelike(r.p1, r.p2) {
        return Err(WorldviewError::ShapeMismatch("p1 and p2 must be spacelike".into()));
    }
    Ok(())
}

/// Builds `π_i = {E_i⁺, E_i⁻}` inside `Ω_{p0}`, where `E_i^± = {φ_i(p_i) = 1/0}`
/// over the configurations obeying both rules, and compares them.
pub fn measurement_scenario(
    instance: &MeasurementInstance,
    rules: &[MeasurementRule; 2],
) -> Result<MeasurementReport, WorldviewError> {
    let MeasurementInstance { dag, space, truth, roles } = instance;
    check_shape(dag, roles)?;
    let source = space.field_index(&roles.source)?;
    let points = [roles.p1, roles.p2];
    let mut outcome = [0; 2];
    let mut device = [None; 2];
    for i in 0..2 {
        outcome[i] = space.field_index(&roles.outcomes[i])?;
        if space.fields()[outcome[i]].alphabets[points[i]] != 2 {
            return Err(WorldviewError::ShapeMismatch(format!("`{}` must be binary at its point", roles.outcomes[i])));
        }
        if let MeasurementRule::Compare { device_field } = &rules[i] {
            device[i] = Some(space.field_index(device_field)?);
        }
    }
    let wv = build_worldview(dag, space, truth, roles.p0, DEFAULT_STATE_CAP)?;
    let predicted = |id: u64, i: usize| {
        let d = device[i].map_or(0, |f| space.value(id, f, points[i]));
        (space.value(id, source, roles.region) + d) % 2
    };
    let lawful: Vec<u64> = wv
        .omega()
        .iter()
        .copied()
        .filter(|id| (0..2).all(|i| space.value(*id, outcome[i], points[i]) == predicted(*id, i)))
        .collect();
    let plus =
        |i: usize| -> Vec<bool> { lawful.iter().map(|id| space.value(*id, outcome[i], points[i]) == 1).collect() };
    let e_plus = [plus(0), plus(1)];
    let mut sizes = [[0; 2]; 2];
    let mut valid = [true; 2];
    for i in 0..2 {
        let minus: Vec<bool> = lawful.iter().map(|id| space.value(*id, outcome[i], points[i]) == 0).collect();
        sizes[i] = [e_plus[i].iter().filter(|m| **m).count(), minus.iter().filter(|m| **m).count()];
        valid[i] = e_plus[i].iter().zip(&minus).all(|(a, b)| a ^ b);
    }
    let witness = (0..lawful.len()).find(|k| e_plus[0][*k] != e_plus[1][*k]).map(|k| space.decode(lawful[k]));
    Ok(MeasurementReport {
        omega: lawful.len(),
        partition_sizes: sizes,
        partitions_valid: valid,
        partitions_equal: witness.is_none(),
        witness,
    })
}

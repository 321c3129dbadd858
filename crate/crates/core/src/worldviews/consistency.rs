use std::collections::{BTreeMap, HashMap};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CausalDag, Event, FieldConfigSpace, WorldviewError, WorldviewTheory};
use crate::rng::uniform01;

/// Measure on all configurations, from which point measures are obtained by
/// conditioning on the true past.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalMeasure {
    /// Independent values per slot: `slots[s][v]`.
    Product { slots: Vec<Vec<f64>> },
    /// Explicit weights on configuration ids; absent ids weigh 0.
    Table { weights: BTreeMap<u64, f64> },
}

impl GlobalMeasure {
    pub fn uniform_product(space: &FieldConfigSpace) -> Self {
        GlobalMeasure::Product {
            slots: (0..space.slots()).map(|s| vec![1.0 / f64::from(space.radix(s)); space.radix(s) as usize]).collect(),
        }
    }

    /// Product of independent random per-slot distributions.
    pub fn random_product(space: &FieldConfigSpace, rng: &mut ChaCha8Rng) -> Self {
        let slots = (0..space.slots())
            .map(|s| {
                let w: Vec<f64> = (0..space.radix(s)).map(|_| 0.05 + uniform01(rng)).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            })
            .collect();
        GlobalMeasure::Product { slots }
    }

    pub fn validate(&self, space: &FieldConfigSpace) -> Result<(), WorldviewError> {
        let bad = |m: &str| Err(WorldviewError::InvalidMeasure(m.to_string()));
        match self {
            GlobalMeasure::Product { slots } => {
                if slots.len() != space.slots() {
                    return bad("one distribution per (field, point) slot required");
                }
                for (s, d) in slots.iter().enumerate() {
                    if d.len() != space.radix(s) as usize || d.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return bad("slot distribution does not match its alphabet");
                    }
                    if (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return bad("slot distribution is not normalised");
                    }
                }
            }
            GlobalMeasure::Table { weights } => {
                if weights.values().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return bad("weights must be finite and non-negative");
                }
                if weights.keys().any(|id| u128::from(*id) >= space.total()) {
                    return bad("weight on a configuration outside the space");
                }
            }
        }
        Ok(())
    }

    pub fn weight(&self, space: &FieldConfigSpace, id: u64) -> f64 {
        match self {
            GlobalMeasure::Product { slots } => {
                slots.iter().enumerate().map(|(s, d)| d[space.slot_value(id, s) as usize]).product()
            }
            GlobalMeasure::Table { weights } => weights.get(&id).copied().unwrap_or(0.0),
        }
    }
}

/// Probability measure `P_p` on the power set of `Ω_p`, by outcome weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    pub point: usize,
    weights: Vec<f64>,
}

impl PointMeasure {
    pub fn new(wv: &WorldviewTheory, weights: Vec<f64>) -> Result<Self, WorldviewError> {
        if weights.len() != wv.len() {
            return Err(WorldviewError::InvalidMeasure(format!("{} weights for {} outcomes", weights.len(), wv.len())));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(WorldviewError::InvalidMeasure("weights must lie in [0, 1]".into()));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(WorldviewError::InvalidMeasure("total mass must be 1".into()));
        }
        Ok(Self { point: wv.point, weights })
    }

    /// `P_p(·) = μ(· | Ω_p)`.
    pub fn conditioned(
        global: &GlobalMeasure,
        space: &FieldConfigSpace,
        dag: &CausalDag,
        wv: &WorldviewTheory,
    ) -> Result<Self, WorldviewError> {
        let raw: Vec<f64> = wv.omega().iter().map(|id| global.weight(space, *id)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(WorldviewError::ZeroConditioningMass { point: dag.name(wv.point).to_string() });
        }
        Ok(Self { point: wv.point, weights: raw.into_iter().map(|w| w / total).collect() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probability(&self, e: &Event) -> f64 {
        self.weights.iter().zip(e.members()).filter(|(_, m)| **m).map(|(w, _)| w).sum()
    }

    pub fn conditional(&self, a: &Event, given: &Event, dag: &CausalDag) -> Result<f64, WorldviewError> {
        let m = self.probability(given);
        if m <= 0.0 {
            return Err(WorldviewError::ZeroConditioningMass { point: dag.name(self.point).to_string() });
        }
        Ok(self.probability(&a.intersect(given)) / m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyOptions {
    pub tolerance: f64,
    /// Largest number of points in an event support.
    pub max_support: usize,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_support: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventDescription {
    pub support: Vec<String>,
    /// `(field, point, value)` constraints; empty for a single configuration.
    pub values: Vec<(String, String, u32)>,
    pub configuration: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: String,
    pub event_a: EventDescription,
    pub event_b: Option<EventDescription>,
    pub conditioning: Option<EventDescription>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<Witness>,
}

impl ConditionResult {
    fn new() -> Self {
        Self { passed: true, checked: 0, witness: None }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.checked += 1;
        if !ok && self.passed {
            self.passed = false;
            self.witness = Some(witness());
        }
    }
}

/// A conditioning event of zero probability, skipped rather than failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroMassNote {
    pub condition: u8,
    pub point: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub spacelike_independence: ConditionResult,
    pub consistency: ConditionResult,
    pub conditional_independence: ConditionResult,
    pub zero_mass: Vec<ZeroMassNote>,
}

impl ConsistencyReport {
    pub fn all_passed(&self) -> bool {
        self.spacelike_independence.passed && self.consistency.passed && self.conditional_independence.passed
    }
}

struct Region {
    points: Vec<usize>,
    slots: Vec<usize>,
    size: usize,
}

fn regions(dag: &CausalDag, space: &FieldConfigSpace, max_support: usize) -> Vec<Region> {
    let n = dag.len();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..n).map(|p| vec![p]).collect();
    while let Some(r) = stack.pop() {
        if r.len() < max_support {
            let last = *r.last().unwrap_or(&0);
            for q in last + 1..n {
                let mut s = r.clone();
                s.push(q);
                stack.push(s);
            }
        }
        let slots = space.region_slots(r.iter().copied());
        let size = slots.iter().map(|s| space.radix(*s) as usize).product();
        out.push(Region { points: r, slots, size });
    }
    out.sort_by(|a, b| a.points.cmp(&b.points));
    out
}

fn describe(dag: &CausalDag, space: &FieldConfigSpace, region: &Region, mut key: usize) -> EventDescription {
    let mut values = Vec::new();
    for &s in &region.slots {
        let k = space.radix(s) as usize;
        let f = &space.fields()[s / space.points()].name;
        values.push((f.clone(), dag.name(s % space.points()).to_string(), (key % k) as u32));
        key /= k;
    }
    EventDescription {
        support: region.points.iter().map(|p| dag.name(*p).to_string()).collect(),
        values,
        configuration: None,
    }
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|p| !b.contains(p))
}

/// Checks the three causal-consistency conditions for the measures of an
/// observer chain (worldviews and measures aligned, points forming a chain):
///
/// 1. events with spacelike supports are independent under every `P_p`;
/// 2. `P_q(A) = P_p(A | Ω_q)` for `p ≤ q` on the chain, checked on every
///    atom of `Ω_q`;
/// 3. events are independent given each value of the fields on the joint
///    past `J⁻(R(A)) ∩ J⁻(R(B))` of their supports.
///
/// Events are cylinder sets fixing all fields on supports of up to
/// `max_support` points.
pub fn check_consistency(
    dag: &CausalDag,
    space: &FieldConfigSpace,
    worldviews: &[WorldviewTheory],
    measures: &[PointMeasure],
    opts: &ConsistencyOptions,
) -> Result<ConsistencyReport, WorldviewError> {
    if worldviews.len() != measures.len() || worldviews.iter().zip(measures).any(|(w, m)| w.point != m.point) {
        return Err(WorldviewError::InvalidConfig("worldviews and measures must be aligned".into()));
    }
    let chain: Vec<usize> = worldviews.iter().map(|w| w.point).collect();
    if !dag.is_chain(&chain) {
        return Err(WorldviewError::InvalidConfig("observer points must form a chain".into()));
    }
    let regs = regions(dag, space, opts.max_support.max(1));
    let tol = opts.tolerance;
    let mut report = ConsistencyReport {
        spacelike_independence: ConditionResult::new(),
        consistency: ConditionResult::new(),
        conditional_independence: ConditionResult::new(),
        zero_mass: Vec::new(),
    };

    for (wv, mu) in worldviews.iter().zip(measures) {
        let pname = dag.name(wv.point).to_string();
        let mut zero3 = 0;
        for (i, ra) in regs.iter().enumerate() {
            for rb in &regs[i + 1..] {
                if !disjoint(&ra.points, &rb.points) {
                    continue;
                }
                let spacelike = ra.points.iter().all(|x| rb.points.iter().all(|y| dag.spacelike(*x, *y)));
                let past = {
                    let mut s = dag.region_past(&ra.points);
                    s.intersect_with(&dag.region_past(&rb.points));
                    s
                };
                let jpoints: Vec<usize> = past.ones().collect();
                let jslots = space.region_slots(jpoints.iter().copied());
                let cells = ra.size * rb.size;
                let mut groups: HashMap<u64, Vec<f64>> = HashMap::new();
                for (id, w) in wv.omega().iter().zip(mu.weights()) {
                    let ka = space.restriction_key(*id, &ra.slots) as usize;
                    let kb = space.restriction_key(*id, &rb.slots) as usize;
                    let kj = space.restriction_key(*id, &jslots);
                    groups.entry(kj).or_insert_with(|| vec![0.0; cells])[ka * rb.size + kb] += w;
                }
                let check = |table: &[f64], result: &mut ConditionResult, cond: Option<EventDescription>| {
                    let mass: f64 = table.iter().sum();
                    let pa: Vec<f64> = (0..ra.size)
                        .map(|a| table[a * rb.size..(a + 1) * rb.size].iter().sum::<f64>() / mass)
                        .collect();
                    let pb: Vec<f64> = (0..rb.size)
                        .map(|b| (0..ra.size).map(|a| table[a * rb.size + b]).sum::<f64>() / mass)
                        .collect();
                    for a in 0..ra.size {
                        for b in 0..rb.size {
                            let joint = table[a * rb.size + b] / mass;
                            result.record((joint - pa[a] * pb[b]).abs() <= tol, || Witness {
                                point: pname.clone(),
                                event_a: describe(dag, space, ra, a),
                                event_b: Some(describe(dag, space, rb, b)),
                                conditioning: cond.clone(),
                                lhs: joint,
                                rhs: pa[a] * pb[b],
                            });
                        }
                    }
                };
                if spacelike {
                    let mut total = vec![0.0; cells];
                    for t in groups.values() {
                        total.iter_mut().zip(t).for_each(|(x, y)| *x += y);
                    }
                    check(&total, &mut report.spacelike_independence, None);
                }
                let jregion = Region { points: jpoints.clone(), slots: jslots.clone(), size: 0 };
                let mut keys: Vec<&u64> = groups.keys().collect();
                keys.sort();
                for kj in keys {
                    let table = &groups[kj];
                    if table.iter().sum::<f64>() <= 0.0 {
                        zero3 += 1;
                        continue;
                    }
                    let cond = describe(dag, space, &jregion, *kj as usize);
                    check(table, &mut report.conditional_independence, Some(cond));
                }
            }
        }
        if zero3 > 0 {
            report.zero_mass.push(ZeroMassNote { condition: 3, point: pname, count: zero3 });
        }
    }

    for (i, (wp, mp)) in worldviews.iter().zip(measures).enumerate() {
        for (wq, mq) in worldviews.iter().zip(measures).skip(i + 1) {
            let (wp, mp, wq, mq) = if dag.leq(wp.point, wq.point) { (wp, mp, wq, mq) } else { (wq, mq, wp, mp) };
            let given = wp.restriction_event(wq);
            let mass = mp.probability(&given);
            if mass <= 0.0 {
                report.zero_mass.push(ZeroMassNote { condition: 2, point: dag.name(wp.point).to_string(), count: 1 });
                continue;
            }
            for (j, id) in wq.omega().iter().enumerate() {
                let Some(k) = wp.position(*id) else {
                    return Err(WorldviewError::InvalidConfig("sample spaces are not nested".into()));
                };
                let lhs = mq.weights()[j];
                let rhs = mp.weights()[k] / mass;
                report.consistency.record((lhs - rhs).abs() <= tol, || Witness {
                    point: dag.name(wq.point).to_string(),
                    event_a: EventDescription { support: Vec::new(), values: Vec::new(), configuration: Some(*id) },
                    event_b: None,
                    conditioning: Some(EventDescription {
                        support: dag.past(wq.point).ones().map(|p| dag.name(p).to_string()).collect(),
                        values: Vec::new(),
                        configuration: None,
                    }),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(report)
}

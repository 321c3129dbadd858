use super::{CausalDag, Configuration, FieldConfigSpace, WorldviewError};

pub const DEFAULT_STATE_CAP: u64 = 1_000_000;

/// Sample space `Ω_p` of the observer at `p`: every configuration agreeing
/// with the true one on `J⁻(p)`. The event algebra is the full power set
/// of `Ω_p`; events are subsets of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldviewTheory {
    pub point: usize,
    omega: Vec<u64>,
}

/// A subset of some `Ω_p`, indexed like its sample space, with the region
/// it constrains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub support: Vec<usize>,
    members: Vec<bool>,
}

pub fn build_worldview(
    dag: &CausalDag,
    space: &FieldConfigSpace,
    truth: &Configuration,
    p: usize,
    cap: u64,
) -> Result<WorldviewTheory, WorldviewError> {
    if p >= dag.len() || dag.len() != space.points() {
        return Err(WorldviewError::UnknownPoint(format!("#{p}")));
    }
    space.validate_truth(dag, truth)?;
    let past = dag.past(p);
    let free: Vec<usize> = (0..space.slots()).filter(|s| !past.contains(s % space.points())).collect();
    let size: u128 = free.iter().map(|s| u128::from(space.radix(*s))).product();
    if size > u128::from(cap) {
        return Err(WorldviewError::StateSpaceTooLarge { size, cap });
    }
    let truth_id = space.encode(truth)?;
    let base = free.iter().fold(truth_id, |id, s| id - u64::from(space.slot_value(truth_id, *s)) * space.stride(*s));
    // Odometer over the free slots, lowest stride first, so ids come out sorted.
    let mut digits = vec![0u32; free.len()];
    let mut omega = Vec::with_capacity(size as usize);
    let mut id = base;
    loop {
        omega.push(id);
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(WorldviewTheory { point: p, omega });
            }
            let s = free[k];
            digits[k] += 1;
            id += space.stride(s);
            if digits[k] < space.radix(s) {
                break;
            }
            id -= u64::from(digits[k]) * space.stride(s);
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Worldviews at every point of `points`.
pub fn build_worldviews(
    dag: &CausalDag,
    space: &FieldConfigSpace,
    truth: &Configuration,
    points: &[usize],
    cap: u64,
) -> Result<Vec<WorldviewTheory>, WorldviewError> {
    points.iter().map(|p| build_worldview(dag, space, truth, *p, cap)).collect()
}

impl WorldviewTheory {
    pub fn omega(&self) -> &[u64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.omega.binary_search(&id).ok()
    }

    /// `Ω_self ⊇ Ω_other`.
    pub fn includes(&self, other: &WorldviewTheory) -> bool {
        other.omega.len() <= self.omega.len() && other.omega.iter().all(|id| self.position(*id).is_some())
    }

    /// `Λ_self ⊇ Λ_other` inside the power set of all configurations: every
    /// event of `other` must be a subset of `Ω_self`. Events are enumerated
    /// exhaustively when `other` has at most `exhaustive_limit` outcomes;
    /// beyond that only the atoms are checked, which generate the power set.
    pub fn algebra_includes(&self, other: &WorldviewTheory, exhaustive_limit: usize) -> bool {
        if other.len() > exhaustive_limit.min(20) {
            return self.includes(other);
        }
        let own: std::collections::HashSet<u64> = self.omega.iter().copied().collect();
        (0u32..(1 << other.len()))
            .all(|mask| (0..other.len()).filter(|i| mask >> i & 1 == 1).all(|i| own.contains(&other.omega[i])))
    }

    /// `log₂ |Λ_p|`.
    pub fn algebra_size_log2(&self) -> usize {
        self.omega.len()
    }

    pub fn full_event(&self) -> Event {
        Event { support: Vec::new(), members: vec![true; self.len()] }
    }

    pub fn event_from_fn(&self, support: Vec<usize>, mut f: impl FnMut(u64) -> bool) -> Event {
        Event { support, members: self.omega.iter().map(|id| f(*id)).collect() }
    }

    /// Configurations whose field `field_name` takes `values` on `region`.
    pub fn event(
        &self,
        space: &FieldConfigSpace,
        field_name: &str,
        region: &[usize],
        values: &[u32],
    ) -> Result<Event, WorldviewError> {
        let f = space.field_index(field_name)?;
        if region.len() != values.len() {
            return Err(WorldviewError::InvalidConfig(format!(
                "{} values for a region of {} points",
                values.len(),
                region.len()
            )));
        }
        if let Some(p) = region.iter().find(|p| **p >= space.points()) {
            return Err(WorldviewError::UnknownPoint(format!("#{p}")));
        }
        Ok(self
            .event_from_fn(region.to_vec(), |id| region.iter().zip(values).all(|(p, v)| space.value(id, f, *p) == *v)))
    }

    /// The event `Ω_q` seen from here: configurations agreeing with the truth
    /// on `J⁻(q)`.
    pub fn restriction_event(&self, other: &WorldviewTheory) -> Event {
        let mut members = vec![false; self.len()];
        for id in &other.omega {
            if let Some(i) = self.position(*id) {
                members[i] = true;
            }
        }
        Event { support: Vec::new(), members }
    }
}

impl Event {
    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn intersect(&self, other: &Event) -> Event {
        self.combine(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Event) -> Event {
        self.combine(other, |a, b| a || b)
    }

    pub fn complement(&self) -> Event {
        Event { support: self.support.clone(), members: self.members.iter().map(|m| !m).collect() }
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.members.iter().zip(&other.members).all(|(a, b)| !a || *b)
    }

    pub fn same_members(&self, other: &Event) -> bool {
        self.members == other.members
    }

    fn combine(&self, other: &Event, op: impl Fn(bool, bool) -> bool) -> Event {
        let mut support = self.support.clone();
        support.extend(other.support.iter().filter(|p| !self.support.contains(p)));
        Event { support, members: self.members.iter().zip(&other.members).map(|(a, b)| op(*a, *b)).collect() }
    }
}

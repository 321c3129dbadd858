use fixedbitset::FixedBitSet;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CausalDag, WorldviewError, WorldviewTheory};
use crate::rng::uniform01;

/// Largest down-set for which sieves are enumerated.
pub const DEFAULT_SIEVE_CAP: usize = 20;

/// Finite partial order; `below[x]` is `{y : y ≤ x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePoset {
    below: Vec<FixedBitSet>,
}

impl FinitePoset {
    /// Reflexive-transitive closure of `relations` (`(a, b)` meaning `a ≤ b`).
    pub fn new(n: usize, relations: &[(usize, usize)]) -> Result<Self, WorldviewError> {
        let mut below = vec![FixedBitSet::with_capacity(n); n];
        for (x, set) in below.iter_mut().enumerate() {
            set.insert(x);
        }
        for &(a, b) in relations {
            if a >= n || b >= n {
                return Err(WorldviewError::UnknownPoint(format!("#{}", a.max(b))));
            }
            below[b].insert(a);
        }
        for k in 0..n {
            for x in 0..n {
                if below[x].contains(k) {
                    let bk = below[k].clone();
                    below[x].union_with(&bk);
                }
            }
        }
        for x in 0..n {
            if let Some(y) = below[x].ones().find(|y| *y != x && below[*y].contains(x)) {
                return Err(WorldviewError::Cycle(format!("{x} ≤ {y} ≤ {x}")));
            }
        }
        Ok(Self { below })
    }

    pub fn chain(n: usize) -> Self {
        let rel: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &rel).expect("a chain is a partial order")
    }

    /// Random order: each pair `i < j` related with probability `p`.
    pub fn random(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut rel = Vec::new();
        for j in 0..n {
            for i in 0..j {
                if uniform01(rng) < p {
                    rel.push((i, j));
                }
            }
        }
        Self::new(n, &rel).expect("relations follow index order")
    }

    pub fn len(&self) -> usize {
        self.below.len()
    }

    pub fn is_empty(&self) -> bool {
        self.below.is_empty()
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.below[b].contains(a)
    }

    pub fn down_set(&self, x: usize) -> &FixedBitSet {
        &self.below[x]
    }

    /// Pairs `(a, b)` with `b` covering `a`.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for b in 0..n {
            for a in self.below[b].ones().filter(|a| *a != b) {
                if !(0..n).any(|c| c != a && c != b && self.leq(a, c) && self.leq(c, b)) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Sieves at one element: down-closed subsets of its down-set, as bit masks
/// over poset elements.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveAlgebra {
    below: Vec<u64>,
    top: u64,
    elements: Vec<u64>,
}

/// All sieves at `element`. Fails if the down-set has more than `cap`
/// elements or the poset more than 64.
pub fn sieves(poset: &FinitePoset, element: usize, cap: usize) -> Result<SieveAlgebra, WorldviewError> {
    if element >= poset.len() {
        return Err(WorldviewError::UnknownPoint(format!("#{element}")));
    }
    let down = poset.down_set(element);
    let size = down.count_ones(..);
    if size > cap.min(64) || poset.len() > 64 {
        return Err(WorldviewError::PosetTooLarge { size: size.max(poset.len()), cap: cap.min(64) });
    }
    let mask = |s: &FixedBitSet| s.ones().fold(0u64, |m, i| m | 1 << i);
    let below: Vec<u64> = (0..poset.len()).map(|x| mask(poset.down_set(x))).collect();
    // Linear extension of the down-set: smaller down-sets first.
    let mut order: Vec<usize> = down.ones().collect();
    order.sort_by_key(|x| (below[*x].count_ones(), *x));
    let mut elements = vec![0u64];
    for &x in &order {
        let strict = below[x] & !(1 << x);
        let extra: Vec<u64> = elements.iter().filter(|s| *s & strict == strict).map(|s| s | 1 << x).collect();
        elements.extend(extra);
    }
    elements.sort_unstable();
    Ok(SieveAlgebra { below, top: mask(down), elements })
}

impl SieveAlgebra {
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, s: u64) -> bool {
        self.elements.binary_search(&s).is_ok()
    }

    pub fn top(&self) -> u64 {
        self.top
    }

    pub fn bottom(&self) -> u64 {
        0
    }

    pub fn meet(&self, a: u64, b: u64) -> u64 {
        a & b
    }

    pub fn join(&self, a: u64, b: u64) -> u64 {
        a | b
    }

    /// Largest sieve `c` with `c ∧ a ≤ b`: the `x` whose down-set meets `a`
    /// only inside `b`.
    pub fn implies(&self, a: u64, b: u64) -> u64 {
        let mut out = 0;
        let mut rest = self.top;
        while rest != 0 {
            let x = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if self.below[x] & a & !b == 0 {
                out |= 1 << x;
            }
        }
        out
    }

    pub fn neg(&self, a: u64) -> u64 {
        self.implies(a, 0)
    }

    pub fn leq(&self, a: u64, b: u64) -> bool {
        a & !b == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeytingReport {
    pub sieves: usize,
    /// Meets, joins and implications of sieves are sieves.
    pub closed: bool,
    pub distributive: bool,
    pub modus_ponens: bool,
    pub implication_identity: bool,
    pub adjunction: bool,
    /// `a ∨ ¬a = ⊤` for every `a`.
    pub boolean: bool,
    pub counterexample: Option<String>,
}

impl HeytingReport {
    pub fn heyting(&self) -> bool {
        self.closed && self.distributive && self.modus_ponens && self.implication_identity && self.adjunction
    }
}

/// Exhaustive check over all pairs and triples of sieves.
pub fn check_heyting_laws(alg: &SieveAlgebra) -> HeytingReport {
    let els = alg.elements();
    let mut r = HeytingReport {
        sieves: els.len(),
        closed: true,
        distributive: true,
        modus_ponens: true,
        implication_identity: true,
        adjunction: true,
        boolean: true,
        counterexample: None,
    };
    let fail = |flag: &mut bool, msg: String, cx: &mut Option<String>| {
        if *flag {
            *flag = false;
            cx.get_or_insert(msg);
        }
    };
    for &a in els {
        if alg.implies(a, a) != alg.top() {
            fail(&mut r.implication_identity, format!("{a:#b} → {a:#b} ≠ ⊤"), &mut r.counterexample);
        }
        if alg.join(a, alg.neg(a)) != alg.top() {
            r.boolean = false;
        }
        for &b in els {
            let imp = alg.implies(a, b);
            if !alg.contains(alg.meet(a, b)) || !alg.contains(alg.join(a, b)) || !alg.contains(imp) {
                fail(&mut r.closed, format!("operations on {a:#b}, {b:#b} leave the sieves"), &mut r.counterexample);
            }
            if !alg.leq(alg.meet(a, imp), b) {
                fail(&mut r.modus_ponens, format!("{a:#b} ∧ ({a:#b} → {b:#b}) ≰ {b:#b}"), &mut r.counterexample);
            }
            for &c in els {
                if alg.leq(c, imp) != alg.leq(alg.meet(c, a), b) {
                    fail(
                        &mut r.adjunction,
                        format!("adjunction fails at {c:#b}, {a:#b}, {b:#b}"),
                        &mut r.counterexample,
                    );
                }
                if alg.meet(a, alg.join(b, c)) != alg.join(alg.meet(a, b), alg.meet(a, c)) {
                    fail(
                        &mut r.distributive,
                        format!("distributivity fails at {a:#b}, {b:#b}, {c:#b}"),
                        &mut r.counterexample,
                    );
                }
            }
        }
    }
    r
}

/// The map `p ↦ Λ_p` onto the poset of distinct event algebras ordered by
/// inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraFunctor {
    /// Algebra class of each point.
    pub class_of: Vec<usize>,
    /// `|Ω|` of each class; `|Λ| = 2^|Ω|`.
    pub omega_sizes: Vec<usize>,
    /// Classes ordered by `Λ_a ⊆ Λ_b`.
    pub poset: FinitePoset,
    /// Covering pairs of `poset`.
    pub adjacency: Vec<(usize, usize)>,
    /// `p ≤ q ⇒ Λ_p ⊇ Λ_q` on every comparable pair.
    pub contravariant: bool,
    /// Restrictions compose along every `p ≤ q ≤ r`.
    pub functorial: bool,
    /// Comparable pairs `(p, q)` violating order reversal.
    pub violations: Vec<(String, String)>,
}

impl AlgebraFunctor {
    /// Sieves at the algebra of point `p`.
    pub fn sieves_at(&self, p: usize, cap: usize) -> Result<SieveAlgebra, WorldviewError> {
        sieves(&self.poset, self.class_of[p], cap)
    }
}

/// `worldviews[i]` must be the worldview at point `i`.
pub fn event_algebra_functor(
    dag: &CausalDag,
    worldviews: &[WorldviewTheory],
) -> Result<AlgebraFunctor, WorldviewError> {
    let n = dag.len();
    if worldviews.len() != n || worldviews.iter().enumerate().any(|(i, w)| w.point != i) {
        return Err(WorldviewError::InvalidConfig("one worldview per point, in point order".into()));
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut class_of = vec![0; n];
    for p in 0..n {
        match reps.iter().position(|r| worldviews[*r].omega() == worldviews[p].omega()) {
            Some(c) => class_of[p] = c,
            None => {
                class_of[p] = reps.len();
                reps.push(p);
            }
        }
    }
    let mut rel = Vec::new();
    for (a, ra) in reps.iter().enumerate() {
        for (b, rb) in reps.iter().enumerate() {
            if a != b && worldviews[*rb].includes(&worldviews[*ra]) {
                rel.push((a, b));
            }
        }
    }
    let poset = FinitePoset::new(reps.len(), &rel)?;
    let mut violations = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if p != q && dag.leq(p, q) && !poset.leq(class_of[q], class_of[p]) {
                violations.push((dag.name(p).to_string(), dag.name(q).to_string()));
            }
        }
    }
    let mut functorial = true;
    for p in 0..n {
        for q in dag.past(p).ones().collect::<Vec<_>>().into_iter().rev() {
            // q ≤ p; check r ≤ q ≤ p.
            for r in dag.past(q).ones() {
                let direct = worldviews[r].restriction_event(&worldviews[p]);
                let via_q = worldviews[q].restriction_event(&worldviews[p]);
                let composed: Vec<bool> = worldviews[r]
                    .omega()
                    .iter()
                    .map(|id| worldviews[q].position(*id).is_some_and(|k| via_q.members()[k]))
                    .collect();
                if direct.members() != composed.as_slice() {
                    functorial = false;
                }
            }
        }
    }
    Ok(AlgebraFunctor {
        class_of,
        omega_sizes: reps.iter().map(|r| worldviews[*r].len()).collect(),
        adjacency: poset.covers(),
        poset,
        contravariant: violations.is_empty(),
        functorial,
        violations,
    })
}

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use rand_chacha::ChaCha8Rng;

use super::{Field, FieldConfigSpace, WorldviewError};
use crate::rng::uniform01;

/// Finite causal order. `past[p]` is the reflexive causal past `J⁻(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    past: Vec<FixedBitSet>,
}

impl CausalDag {
    /// `edges` are pairs `(p, q)` meaning `p < q`.
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, WorldviewError> {
        let n = names.len();
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(WorldviewError::InvalidConfig(format!("duplicate point `{name}`")));
            }
        }
        let mut parents = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        let mut children = vec![Vec::new(); n];
        for &(p, q) in edges {
            if p >= n || q >= n {
                return Err(WorldviewError::UnknownPoint(format!("#{}", p.max(q))));
            }
            if p == q {
                return Err(WorldviewError::Cycle(names[p].clone()));
            }
            parents[q].push(p);
            children[p].push(q);
            indegree[q] += 1;
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
        while let Some(p) = ready.pop() {
            order.push(p);
            for &c in &children[p] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|i| indegree[*i] > 0).unwrap_or(0);
            return Err(WorldviewError::Cycle(names[stuck].clone()));
        }
        let mut past = vec![FixedBitSet::with_capacity(n); n];
        for &p in &order {
            let mut set = FixedBitSet::with_capacity(n);
            set.insert(p);
            for &q in &parents[p] {
                set.union_with(&past[q]);
            }
            past[p] = set;
        }
        Ok(Self { names, index, edges: edges.to_vec(), past })
    }

    /// Points named `0 … n−1`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, WorldviewError> {
        Self::new((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn chain(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("a chain is acyclic")
    }

    pub fn antichain(n: usize) -> Self {
        Self::from_edges(n, &[]).expect("no edges")
    }

    /// `bottom < left, right < top`, with `left ∥ right`.
    pub fn diamond() -> Self {
        let names = ["bottom", "left", "right", "top"].map(String::from).to_vec();
        Self::new(names, &[(0, 1), (0, 2), (1, 3), (2, 3)]).expect("the diamond is acyclic")
    }

    /// Random order on `n` points: each pair `i < j` is an edge with
    /// probability `edge_probability`.
    pub fn random(n: usize, edge_probability: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut edges = Vec::new();
        for j in 0..n {
            for i in 0..j {
                if uniform01(rng) < edge_probability {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges).expect("edges follow index order")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, p: usize) -> &str {
        &self.names[p]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index(&self, name: &str) -> Result<usize, WorldviewError> {
        self.index.get(name).copied().ok_or_else(|| WorldviewError::UnknownPoint(name.to_string()))
    }

    pub fn past(&self, p: usize) -> &FixedBitSet {
        &self.past[p]
    }

    /// `J⁻(p)` by name.
    pub fn causal_past(&self, name: &str) -> Result<Vec<&str>, WorldviewError> {
        let p = self.index(name)?;
        Ok(self.past[p].ones().map(|q| self.names[q].as_str()).collect())
    }

    pub fn leq(&self, p: usize, q: usize) -> bool {
        self.past[q].contains(p)
    }

    pub fn spacelike(&self, p: usize, q: usize) -> bool {
        !self.leq(p, q) && !self.leq(q, p)
    }

    /// `J⁻` of a region: the union of the pasts of its points.
    pub fn region_past(&self, region: &[usize]) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len());
        for &p in region {
            set.union_with(&self.past[p]);
        }
        set
    }

    pub fn is_chain(&self, points: &[usize]) -> bool {
        points.iter().all(|&p| points.iter().all(|&q| !self.spacelike(p, q)))
    }

    /// A maximal chain built greedily upwards from the first minimal point.
    pub fn greedy_chain(&self) -> Vec<usize> {
        let n = self.len();
        let Some(mut p) = (0..n).find(|p| self.past[*p].count_ones(..) == 1) else {
            return Vec::new();
        };
        let mut chain = vec![p];
        // Immediate successor: an upper point with the smallest past.
        while let Some(q) =
            (0..n).filter(|q| *q != p && self.leq(p, *q)).min_by_key(|q| (self.past[*q].count_ones(..), *q))
        {
            chain.push(q);
            p = q;
        }
        chain
    }
}

/// Parsed text description: a causal order plus field alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct DagSpec {
    pub dag: CausalDag,
    pub space: FieldConfigSpace,
}

/// Parses the edge-list format:
///
/// ```text
/// # comment
/// point p0            declare a point
/// p0 r                edge p0 < r (declares both points)
/// field psi 2         field with 2 values at every point
/// alphabet psi r 3    override the alphabet of one field at one point
/// ```
pub fn parse_dag_spec(text: &str) -> Result<DagSpec, WorldviewError> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut fields: Vec<(String, u32)> = Vec::new();
    let mut overrides: Vec<(usize, String, String, u32)> = Vec::new();
    let mut point = |name: &str, names: &mut Vec<String>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let size = |s: &str, line: usize| {
        s.parse::<u32>()
            .ok()
            .filter(|v| *v >= 1)
            .ok_or(WorldviewError::Parse { line, message: format!("alphabet size `{s}` must be a positive integer") })
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let words: Vec<&str> = content.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["point", p] => {
                point(p, &mut names);
            }
            ["field", f, k] => fields.push((f.to_string(), size(k, line)?)),
            ["alphabet", f, p, k] => overrides.push((line, f.to_string(), p.to_string(), size(k, line)?)),
            [p, q] if !["point", "field", "alphabet"].contains(p) => {
                let (a, b) = (point(p, &mut names), point(q, &mut names));
                edges.push((a, b));
            }
            _ => return Err(WorldviewError::Parse { line, message: format!("unrecognised line `{content}`") }),
        }
    }
    let dag = CausalDag::new(names, &edges)?;
    let mut fields: Vec<Field> =
        fields.into_iter().map(|(name, k)| Field { name, alphabets: vec![k; dag.len()] }).collect();
    for (line, f, p, k) in overrides {
        let field = fields
            .iter_mut()
            .find(|x| x.name == f)
            .ok_or(WorldviewError::Parse { line, message: format!("unknown field `{f}`") })?;
        let p = dag.index(&p).map_err(|e| WorldviewError::Parse { line, message: e.to_string() })?;
        field.alphabets[p] = k;
    }
    let space = FieldConfigSpace::new(dag.len(), fields)?;
    Ok(DagSpec { dag, space })
}

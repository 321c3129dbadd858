use serde::{Deserialize, Serialize};

use super::{CausalDag, WorldviewError};

/// Name of the observer-indicator field: 1 on the observer's worldline.
pub const OBSERVER_FIELD: &str = "observer";

/// A named field with one finite alphabet `{0, …, k−1}` per point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub alphabets: Vec<u32>,
}

/// All assignments of every field at every point. A configuration is
/// encoded as a mixed-radix integer over the slots `(field, point)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldConfigSpace {
    points: usize,
    fields: Vec<Field>,
    strides: Vec<u64>,
}

/// Values indexed `[field][point]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<Vec<u32>>,
}

impl FieldConfigSpace {
    pub fn new(points: usize, fields: Vec<Field>) -> Result<Self, WorldviewError> {
        let mut strides = Vec::with_capacity(points * fields.len());
        let mut total: u128 = 1;
        for (fi, f) in fields.iter().enumerate() {
            if fields[..fi].iter().any(|g| g.name == f.name) {
                return Err(WorldviewError::InvalidConfig(format!("duplicate field `{}`", f.name)));
            }
            if f.alphabets.len() != points {
                return Err(WorldviewError::InvalidConfig(format!(
                    "field `{}` has {} alphabets for {points} points",
                    f.name,
                    f.alphabets.len()
                )));
            }
            for &k in &f.alphabets {
                if k == 0 {
                    return Err(WorldviewError::InvalidConfig(format!("field `{}` has an empty alphabet", f.name)));
                }
                strides.push(total as u64);
                total *= u128::from(k);
                if total > u128::from(u64::MAX) {
                    return Err(WorldviewError::StateSpaceTooLarge { size: total, cap: u64::MAX });
                }
            }
        }
        Ok(Self { points, fields, strides })
    }

    /// One field with the same alphabet everywhere.
    pub fn uniform(points: usize, names: &[&str], alphabet: u32) -> Result<Self, WorldviewError> {
        Self::new(
            points,
            names.iter().map(|n| Field { name: n.to_string(), alphabets: vec![alphabet; points] }).collect(),
        )
    }

    /// Adds the binary observer-indicator field.
    pub fn with_observer(mut self) -> Result<Self, WorldviewError> {
        self.fields.push(Field { name: OBSERVER_FIELD.into(), alphabets: vec![2; self.points] });
        Self::new(self.points, self.fields)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field_index(&self, name: &str) -> Result<usize, WorldviewError> {
        self.fields.iter().position(|f| f.name == name).ok_or_else(|| WorldviewError::UnknownField(name.to_string()))
    }

    pub fn slot(&self, field: usize, point: usize) -> usize {
        field * self.points + point
    }

    pub fn slots(&self) -> usize {
        self.strides.len()
    }

    pub fn radix(&self, slot: usize) -> u32 {
        self.fields[slot / self.points].alphabets[slot % self.points]
    }

    pub fn stride(&self, slot: usize) -> u64 {
        self.strides[slot]
    }

    /// Number of configurations.
    pub fn total(&self) -> u128 {
        (0..self.slots()).map(|s| u128::from(self.radix(s))).product()
    }

    pub fn slot_value(&self, id: u64, slot: usize) -> u32 {
        ((id / self.strides[slot]) % u64::from(self.radix(slot))) as u32
    }

    pub fn value(&self, id: u64, field: usize, point: usize) -> u32 {
        self.slot_value(id, self.slot(field, point))
    }

    /// Slots of all fields at the given points, in field-major order.
    pub fn region_slots(&self, region: impl IntoIterator<Item = usize> + Clone) -> Vec<usize> {
        (0..self.fields.len())
            .flat_map(|f| region.clone().into_iter().map(move |p| (f, p)))
            .map(|(f, p)| self.slot(f, p))
            .collect()
    }

    /// Mixed-radix index of a configuration restricted to `slots`.
    pub fn restriction_key(&self, id: u64, slots: &[usize]) -> u64 {
        let mut key = 0u64;
        for &s in slots.iter().rev() {
            key = key * u64::from(self.radix(s)) + u64::from(self.slot_value(id, s));
        }
        key
    }

    pub fn validate(&self, c: &Configuration) -> Result<(), WorldviewError> {
        if c.values.len() != self.fields.len() {
            return Err(WorldviewError::InvalidConfig(format!(
                "configuration has {} fields, expected {}",
                c.values.len(),
                self.fields.len()
            )));
        }
        for (f, vals) in self.fields.iter().zip(&c.values) {
            if vals.len() != self.points {
                return Err(WorldviewError::InvalidConfig(format!("field `{}` needs {} values", f.name, self.points)));
            }
            if let Some((p, v)) = vals.iter().enumerate().find(|(p, v)| **v >= f.alphabets[*p]) {
                return Err(WorldviewError::InvalidConfig(format!(
                    "value {v} of `{}` at point {p} is out of range",
                    f.name
                )));
            }
        }
        Ok(())
    }

    /// Checks ranges and, when the observer field is present, that its
    /// support is a chain of `dag`.
    pub fn validate_truth(&self, dag: &CausalDag, c: &Configuration) -> Result<(), WorldviewError> {
        self.validate(c)?;
        if let Ok(f) = self.field_index(OBSERVER_FIELD) {
            let support: Vec<usize> = (0..self.points).filter(|p| c.values[f][*p] == 1).collect();
            if !dag.is_chain(&support) {
                return Err(WorldviewError::InvalidConfig("observer support is not a chain".into()));
            }
        }
        Ok(())
    }

    pub fn encode(&self, c: &Configuration) -> Result<u64, WorldviewError> {
        self.validate(c)?;
        let mut id = 0;
        for (f, vals) in c.values.iter().enumerate() {
            for (p, v) in vals.iter().enumerate() {
                id += u64::from(*v) * self.strides[self.slot(f, p)];
            }
        }
        Ok(id)
    }

    pub fn decode(&self, id: u64) -> Configuration {
        Configuration {
            values: (0..self.fields.len()).map(|f| (0..self.points).map(|p| self.value(id, f, p)).collect()).collect(),
        }
    }

    /// All-zero configuration.
    pub fn zero(&self) -> Configuration {
        Configuration { values: vec![vec![0; self.points]; self.fields.len()] }
    }
}

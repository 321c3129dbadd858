//! Observer worldviews on finite causal orders: sample spaces of field
//! configurations consistent with the causal past, their power-set event
//! algebras, causal consistency conditions on measures, the two-observer
//! measurement comparison, and sieve Heyting algebras over the poset of
//! event algebras.

mod consistency;
mod dag;
mod fields;
mod measurement;
mod sieve;
mod worldview;

use thiserror::Error;

pub use consistency::{
    check_consistency, ConditionResult, ConsistencyOptions, ConsistencyReport, EventDescription, GlobalMeasure,
    PointMeasure, Witness, ZeroMassNote,
};
pub use dag::{parse_dag_spec, CausalDag, DagSpec};
pub use fields::{Configuration, Field, FieldConfigSpace, OBSERVER_FIELD};
pub use measurement::{
    measurement_instance, measurement_scenario, MeasurementInstance, MeasurementReport, MeasurementRoles,
    MeasurementRule,
};
pub use sieve::{
    check_heyting_laws, event_algebra_functor, sieves, AlgebraFunctor, FinitePoset, HeytingReport, SieveAlgebra,
    DEFAULT_SIEVE_CAP,
};
pub use worldview::{build_worldview, build_worldviews, Event, WorldviewTheory, DEFAULT_STATE_CAP};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WorldviewError {
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("causal relation has a cycle through `{0}`")]
    Cycle(String),
    #[error("sample space of {size} configurations exceeds the cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("conditioning event at `{point}` has zero probability")]
    ZeroConditioningMass { point: String },
    #[error("scenario shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("poset down-set of {size} elements exceeds the cap {cap}")]
    PosetTooLarge { size: usize, cap: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

//! Curved-spacetime CHSH toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: metrics, geodesics, parallel transport and loop holonomy.
//! - [`scenario`]: the two-observer polarisation experiment built on a
//!   spacetime, with the holonomy decomposition of the measurement angles.
//! - [`dynamics`]: outcome probabilities from the measurement angles, by
//!   closed form, quadrature and Monte Carlo.
//! - [`inverse`]: recovery of the holonomy-difference density that would
//!   reproduce the quantum correlations, and CHSH statistics.
//! - [`worldviews`]: finite causal orders, observer sample spaces, causal
//!   consistency of measures, and sieve Heyting algebras.
//! - [`scan`]: parameter sweeps tying all of the above together.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angles;
pub mod dynamics;
pub mod geometry;
pub mod inverse;
pub mod rng;
pub mod scan;
pub mod scenario;
pub mod worldviews;

/// Version string stamped into reports.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

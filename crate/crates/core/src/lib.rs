//! Recoverable query-response mechanisms over finite alphabets.
//!
//! A user holds a data symbol with known pmf; a querier must recover a given
//! function of it from a randomized response with probability at least `rho`.
//! This crate builds the response channels that maximize the querier's MAP
//! estimation error under that constraint, computes exact privacy for single
//! and repeated independent responses, evaluates the associated converse and
//! achievability bounds and their Chernoff-radius asymptotics, and
//! cross-checks the closed forms against brute-force, Monte-Carlo, and
//! exact-rational oracles.
//!
//! Numeric kernels are generic over [`scalar::Scalar`]; use `f64` for
//! everyday work and [`Rational`] for exact cross-checks. Everything is
//! immutable after construction and safe to share across threads.

pub mod bounds;
mod comb;
pub mod chernoff;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod privacy;
pub mod scalar;

pub use scalar::{parse_rational, Rational, Scalar};

pub use mechanisms::{AddNoiseMechanism, Mechanism};
pub use model::{DataModel, SupportStats};

/// `f64` instantiations, the working set for CLI and reports.
pub type Model64 = model::DataModel<f64>;
pub type Stats64 = model::SupportStats<f64>;
pub type Mechanism64 = mechanisms::Mechanism<f64>;
pub type AddNoise64 = mechanisms::AddNoiseMechanism<f64>;
pub type PrivacyReport64 = privacy::PrivacyReport<f64>;

/// `f32` instantiations.
pub type Model32 = model::DataModel<f32>;
pub type Mechanism32 = mechanisms::Mechanism<f32>;
pub type AddNoise32 = mechanisms::AddNoiseMechanism<f32>;

/// Exact-rational instantiations for the cross-check oracle.
pub type ModelExact = model::DataModel<Rational>;
pub type MechanismExact = mechanisms::Mechanism<Rational>;
pub type AddNoiseExact = mechanisms::AddNoiseMechanism<Rational>;

//! Bayesian inversion machinery over box domains — densities,
//! reparameterizations, conditioning, evidences, hierarchical and
//! trans-dimensional model comparison — with built-in audits that check
//! which of these quantities survive a change of coordinates.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64`) through
//! [`scalar::Scalar`]; the golden-case registry and CLI-facing layers work at
//! `f64`, re-exported here as concrete aliases.

pub mod condition;
pub mod construct;
pub mod coords;
pub mod density;
pub mod error;
pub mod evidence;
pub mod forward;
pub mod hier;
pub mod modal;
pub mod quad;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod transdim;

pub use error::{AuditError, Result};
pub use scalar::Scalar;

/// Concrete f64 aliases for the generic core types.
pub type Point = Vec<f64>;
pub type Box64 = coords::BoxDomain<f64>;
pub type Diffeo64 = coords::Diffeo<f64>;
pub type Density64 = density::Density<f64>;
pub type Forward64 = forward::ForwardModel<f64>;
pub type Quad64 = quad::QuadResult<f64>;

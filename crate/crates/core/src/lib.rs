//! Key-rate lower bounds for high-dimensional time-bin entanglement QKD.
//!
//! The pipeline runs from physical rates to a visibility ([`noise`]), from
//! the visibility to an isotropic time state ([`model`]), from the state to
//! coincidence-click constraints ([`povm`]), from the constraints to a
//! certified lower bound on `S(A|E)` ([`entropy`]), and finally to
//! Devetak-Winter key rates ([`keyrate`]).

pub mod entropy;
pub mod error;
pub mod keyrate;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod povm;

pub use error::{Error, Result};

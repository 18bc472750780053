//! Inflation-based semidefinite relaxations for causal compatibility.
//!
//! A [`scenario::CausalScenario`] describes the DAG, [`inflation`] builds the
//! inflated operator alphabet and its symmetry group, [`monomial`]
//! canonicalizes operator words, [`relaxation`] assembles the symbolic
//! moment matrix, [`sdp`] compiles and solves it, and [`analysis`] turns dual
//! solutions into certificates and critical parameters.

pub mod analysis;
pub mod error;
pub mod inflation;
pub mod monomial;
pub mod oracle;
pub mod relaxation;
pub mod scenario;
pub mod sdp;

pub use error::{Error, Result};

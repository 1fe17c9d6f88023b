//! Geometric Markov chain Monte Carlo.
//!
//! Four samplers share one model contract ([`models::TargetModel`]):
//!
//! - `hmc`: standard leapfrog with a constant diagonal mass matrix;
//! - `rmhmc`: Riemannian manifold HMC with the implicit generalized leapfrog;
//! - `rmlmc`: Lagrangian dynamics in velocity space with one implicit
//!   velocity half-step per leapfrog step;
//! - `ermlmc`: the fully explicit velocity-space integrator.
//!
//! The velocity-space integrators are not volume preserving. Their
//! log-Jacobian is accumulated step by step and added to the Metropolis ratio.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod integrators;
pub mod models;
pub mod samplers;

pub use error::{Error, Result};

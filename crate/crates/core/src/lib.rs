//! Sampling-based stochastic model-predictive control.
//!
//! Dynamics, costs and sampling distributions are pluggable trait objects.
//! The [`engine`] evaluates batches of sampled rollouts in parallel, and the
//! [`controllers`] turn those evaluations into optimal control sequences
//! (MPPI, the step-size variant, CEM and Tube-MPPI). The [`plant`] module is
//! the receding-horizon harness that runs a controller against a simulated
//! system.

pub mod config;
pub mod controllers;
pub mod costs;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod feedback;
pub mod plant;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
pub use types::{ControlTrajectory, ControlVector, ModelDims, OutputTrajectory, OutputVector, StateVector};

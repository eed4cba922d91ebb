//! Hybrid dynamical systems, saltation-based covariance propagation through
//! uncertain guards and resets, and Kalman filters built on top.
//!
//! `no_std` with `alloc`; file formats and the command-line runner live in the
//! companion `uaskf` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > b)` also rejects NaN

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod filter;
pub mod hybrid;
pub mod linalg;
pub mod montecarlo;
pub mod saltation;
pub mod stats;
pub mod systems;

pub use error::{Error, Result};
pub use filter::{FilterConfig, FilterVariant, GaussianBelief, HybridFilter, MeasurementModel, ProcessNoise};
pub use hybrid::{Environment, Guard, HybridSystem, HybridTrajectory, Mode, ModeId, Reset, Tolerances, Transition};
pub use linalg::{Matrix, RowVector, Vector};
pub use saltation::{saltation_bundle, EventContext, SaltationBundle};

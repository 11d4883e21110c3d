//! Resilient task allocation for heterogeneous robot teams.
//!
//! The crate tracks how far each robot's task progress deviates from what its
//! controller predicts, attributes those deviations to robot capabilities on a
//! per-task basis, and re-solves a mixed-integer quadratic allocation program
//! whenever some capability degradation has grown past a threshold.
//!
//! Modules, bottom-up:
//!
//! - [`team`]: capability matrix, robot/species mapping, aggregated and
//!   effective capabilities.
//! - [`tasks`]: task-value functions, gradient controllers, single-integrator
//!   dynamics with disturbances, predicted values and discrepancies, coverage
//!   centroids.
//! - [`degradation`]: instantaneous and time-averaged capability degradation
//!   and the reallocation trigger.
//! - [`allocator`]: the allocation MIQP, a branch-and-bound solver with convex
//!   relaxations, and an exhaustive-enumeration oracle.
//! - [`sim`]: scenario files, built-in scenarios, the event-triggered
//!   simulation loop, traces and randomized trials.
//! - [`cli`]: the command implementations behind the `resalloc` binary.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod cli;
pub mod degradation;
pub mod error;
pub mod geometry;
pub mod sim;
pub mod tasks;
pub mod team;

pub use error::{Error, Result};

//! Simulator of a scaled wheel-roller traction rig and a set of maximum
//! adhesion tracking strategies, with a harness that runs and scores them.
//!
//! The pieces, bottom up:
//! - [`adhesion`]: the adhesion-slip curve family and profile schedules;
//! - [`plant`]: the two-inertia rig, roller speed drive and speed sensors;
//! - [`estimation`]: load observer and adhesion slope estimation;
//! - [`slip_control`]: slip detection, slip PI with its limiter, Min arbitration;
//! - [`strategies`]: constant slip, perturb-and-observe, steepest gradient,
//!   fuzzy and particle-swarm tracking;
//! - [`scenario`] and [`metrics`]: test runs and their scores;
//! - [`config`], [`trace`], [`plot`]: file formats for the command-line tool.

pub mod adhesion;
pub mod config;
pub mod error;
pub mod estimation;
pub mod metrics;
pub mod plant;
pub mod plot;
pub mod scenario;
pub mod slip_control;
pub mod strategies;
pub mod trace;

pub use error::{Error, Result};

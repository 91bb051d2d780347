//! Fourth-down decision engine.
//!
//! Estimates the win probability of going for it, kicking a field goal, or
//! punting on fourth down from historical play-by-play data, and quantifies
//! how much that recommendation can be trusted with a randomized cluster
//! bootstrap over games and drives.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: CSV ingestion, validation, dataset splits and training pools.
//! - [`quality`]: kicker, punter and team quality metrics.
//! - [`spline_glm`]: B-spline bases and linear / logistic GLM fitting.
//! - [`gbt`]: monotone-constrained gradient-boosted trees, the first-down
//!   win probability model and its baseline contest.
//! - [`transition`]: punt, field goal and conversion models.
//! - [`engine`]: composition of the above into Go / FG / Punt values.
//! - [`bootstrap`]: resampling, ensembles, boot%, intervals and stability.
//! - [`coach`]: a model of what coaches actually do, and agreement tables.
//! - [`synthetic`]: an exactly solvable game world used as ground truth.
//! - [`pipeline`]: end-to-end fitting from plays to a decision model.
//! - [`cli`] and [`service`]: the command-line and HTTP surfaces.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bootstrap;
pub mod cli;
pub mod coach;
pub mod data;
pub mod engine;
pub mod error;
pub mod gbt;
pub mod pipeline;
pub mod quality;
pub mod service;
pub mod spline_glm;
pub mod synthetic;
pub mod transition;
mod util;

pub use error::{Error, Result};

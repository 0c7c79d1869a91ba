//! Microscopic simulation of a highway on-ramp merge with segment-level
//! time-headway control of connected automated vehicles.
//!
//! The crate covers the road network and its sensing segments, IDM car
//! following with lane changes, a deterministic simulation engine, the
//! delay-aware speed metrics, fixed and learned headway controllers, a PPO
//! trainer and an experiment runner. See the `examples/` directory for one
//! runnable program per capability.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod sensing;

pub use config::ScenarioConfig;
pub use error::{Error, Result};

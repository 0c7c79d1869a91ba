//! Deterministic discrete-time simulation: demand, insertion, dynamics,
//! exits and recording.

mod demand;
mod record;
mod sim;
mod vehicle;

pub use demand::{generate_demand, DemandSchedule, ScheduledVehicle};
pub use record::{EpisodeRecord, StepRecord, StepTable, VehicleRecord};
pub use sim::{run_episode, run_episode_with, EpisodeOptions, Simulation, SpeedLimitZone};
pub use vehicle::{VehicleClass, VehicleState};

//! Longitudinal car following and lateral lane-change decisions.

mod idm;
mod lane_change;

pub(crate) use idm::accel;
pub use idm::{idm_acceleration, safe_velocity, IdmParams, Leader};
pub use lane_change::{
    lane_change_decision, Ego, LaneChangeKind, LaneChangeParams, LaneView, Neighbor, Neighborhood, Side,
};
